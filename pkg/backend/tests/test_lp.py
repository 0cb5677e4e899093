# tests/test_lp.py
from fractions import Fraction

import pytest

from auction_lab.errors import PreconditionViolated
from auction_lab.lp import maximize

F = Fraction


def test_simple_optimum():
    # max x + y mit x <= 1, y <= 2, x + y <= 5/2
    solution = maximize([F(1), F(1)], [[F(1), F(0)], [F(0), F(1)], [F(1), F(1)]], [F(1), F(2), F(5, 2)])
    assert solution.value == F(5, 2)
    assert sum(solution.x) == F(5, 2)
    assert all(x >= 0 for x in solution.x)


def test_exact_fractions():
    # max 3x + 2y mit x + y <= 4, x + 3y <= 6 -> x = 4
    solution = maximize([F(3), F(2)], [[F(1), F(1)], [F(1), F(3)]], [F(4), F(6)])
    assert solution.x == (F(4), F(0))
    assert solution.value == 12


def test_unbounded_and_negative_rhs():
    with pytest.raises(PreconditionViolated):
        maximize([F(1)], [[F(-1)]], [F(1)])
    with pytest.raises(PreconditionViolated):
        maximize([F(1)], [[F(1)]], [F(-1)])
