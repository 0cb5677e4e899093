import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

_BACKEND_DIR = Path(__file__).resolve().parent.parent


class Config:
    # Verzeichnis mit Szenarien und Golden-Traces
    FIXTURES_DIR = os.getenv("AUCTION_LAB_FIXTURES", str(_BACKEND_DIR / "fixtures"))
    LOG_LEVEL = os.getenv("AUCTION_LAB_LOG_LEVEL", "WARNING")
    # Worker-Pool für `reproduce --all`
    WORKERS = int(os.getenv("AUCTION_LAB_WORKERS", "1"))

    # Größen-Grenzen der exhaustiven Orakel
    EXHAUSTIVE_ITEM_LIMIT = int(os.getenv("AUCTION_LAB_EXHAUSTIVE_ITEM_LIMIT", "20"))
    CLASS_CHECK_ITEM_LIMIT = int(os.getenv("AUCTION_LAB_CLASS_CHECK_ITEM_LIMIT", "16"))
    UNDERAPPROX_ITEM_LIMIT = int(os.getenv("AUCTION_LAB_UNDERAPPROX_ITEM_LIMIT", "15"))
    OPT_ITEM_LIMIT = int(os.getenv("AUCTION_LAB_OPT_ITEM_LIMIT", "14"))
    EXACT_COVER_ITEM_LIMIT = 15
    SUBSPACE_K_LIMIT = 8
    COVER_SETS_K_LIMIT = 16

    # Numerische Defaults (als "p/q"-Strings)
    DEFAULT_EPSILON = os.getenv("AUCTION_LAB_DEFAULT_EPSILON", "1/100")
    POSITIVITY_BLEND = "1/1000"
    GENERATOR_DENOMINATOR = 1000

    MONTE_CARLO_TRIALS = int(os.getenv("AUCTION_LAB_MONTE_CARLO_TRIALS", "2000"))
    HARD_INSTANCE_SAMPLES = int(os.getenv("AUCTION_LAB_HARD_INSTANCE_SAMPLES", "1000"))
