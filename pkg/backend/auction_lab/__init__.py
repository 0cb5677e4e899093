import logging

from flask import Flask

from .config import Config


def create_app(test_config: dict = None):
    # 1) Basis-Config laden
    app = Flask(__name__)
    app.config.from_object(Config)

    # 2) Test-Config (falls vorhanden) direkt überschreiben
    if test_config:
        app.config.update(test_config)

    # 3) Logging nach stderr, stdout bleibt für Reports
    logging.basicConfig(level=app.config["LOG_LEVEL"],
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger("auction_lab").setLevel(app.config["LOG_LEVEL"])

    # Blueprint importieren und registrieren (deferred Import verhindert zirkuläre Abhängigkeiten)
    from .cli import bp as cli_bp

    app.register_blueprint(cli_bp)

    return app
