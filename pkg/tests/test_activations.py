import math
from fractions import Fraction

import numpy as np
import pytest

from intdfa.activations import (
    Activation,
    Slope,
    apply,
    apply_array,
    apply_slope,
    pocket_relu8,
    pocket_sigmoid,
    pocket_tanh,
    slope,
)
from intdfa.matrix import from_rows

XS = range(-512, 513)


def tz(q: Fraction) -> int:
    """Round a rational toward zero."""
    return math.trunc(q)


def oracle_sigmoid(x):
    if x <= -128:
        return 1
    if x <= -75:
        return tz(Fraction(x, 8)) + 20
    if x <= -32:
        return tz(Fraction(x, 2)) + 48
    if x <= 31:
        return x + 64
    if x <= 74:
        return tz(Fraction(x, 2)) + 80
    if x <= 127:
        return tz(Fraction(x, 8)) + 108
    return 127


def oracle_tanh(x):
    if x <= -128:
        return -127
    if x <= -75:
        return tz(Fraction(x, 4)) - 88
    if x <= -32:
        return x - 32
    if x <= 31:
        return 2 * x
    if x <= 74:
        return x + 32
    if x <= 127:
        return tz(Fraction(x, 4)) + 88
    return 127


def oracle_relu8(x):
    return min(max(0, x), 127)


ORACLES = {
    Activation.POCKET_SIGMOID: (pocket_sigmoid, oracle_sigmoid),
    Activation.POCKET_TANH: (pocket_tanh, oracle_tanh),
    Activation.POCKET_RELU8: (pocket_relu8, oracle_relu8),
}


@pytest.mark.parametrize("kind", list(Activation))
def test_exhaustive_against_oracle(kind):
    scalar, oracle = ORACLES[kind]
    want = [oracle(x) for x in XS]
    assert [scalar(x) for x in XS] == want
    assert apply_array(kind, np.array(list(XS))).tolist() == want


def test_tanh_odd_symmetry():
    for x in range(-128, 129):
        assert pocket_tanh(-x) == -pocket_tanh(x)


def test_sigmoid_complement():
    for x in range(-128, 129):
        assert pocket_sigmoid(x) + pocket_sigmoid(-x) == 128


def test_fidelity_to_rescaled_functions():
    for x in range(-127, 128):
        assert abs(pocket_sigmoid(x) - 128 / (1 + math.exp(-x / 32))) <= 8
        assert abs(pocket_tanh(x) - 128 * math.tanh(x / 64)) <= 8


@pytest.mark.parametrize("kind", list(Activation))
def test_output_range(kind):
    out = apply_array(kind, np.arange(-5000, 5001))
    lo = {Activation.POCKET_SIGMOID: 1, Activation.POCKET_TANH: -127, Activation.POCKET_RELU8: 0}[kind]
    assert out.min() == lo and out.max() == 127


def test_spot_values():
    assert pocket_sigmoid(0) == 64
    assert (pocket_sigmoid(-200), pocket_sigmoid(200)) == (1, 127)
    assert pocket_sigmoid(100) == 120
    assert pocket_sigmoid(-100) == 8
    assert pocket_tanh(0) == 0
    assert (pocket_tanh(150), pocket_tanh(-150)) == (127, -127)
    assert pocket_tanh(-100) == -113
    assert pocket_tanh(74) == pocket_tanh(75) == 106
    assert (pocket_relu8(-5), pocket_relu8(50), pocket_relu8(300)) == (0, 50, 127)


def test_apply_matrix():
    assert apply(Activation.POCKET_TANH, from_rows([[0, 150]])).tolist() == [[0, 127]]
    assert apply(Activation.POCKET_RELU8, from_rows([[0, 0]])).tolist() == [[0, 0]]
    assert apply(Activation.POCKET_SIGMOID, from_rows([[31, 32]])).tolist() == [[95, 96]]


def test_slopes():
    assert slope(Activation.POCKET_TANH, 0) == Slope(2, 1)
    assert slope(Activation.POCKET_SIGMOID, 50) == Slope(1, 2)
    assert slope(Activation.POCKET_TANH, 200) == Slope(0, 1)
    assert slope(Activation.POCKET_RELU8, -1) == Slope(0, 1)
    assert slope(Activation.POCKET_RELU8, 127) == Slope(1, 1)
    assert slope(Activation.POCKET_RELU8, 128) == Slope(0, 1)


@pytest.mark.parametrize("kind", [Activation.POCKET_SIGMOID, Activation.POCKET_TANH])
def test_slope_matches_finite_difference(kind):
    # away from piece boundaries the slope is the exact rise over run of the oracle
    _, oracle = ORACLES[kind]
    for x in range(-300, 300):
        s = slope(kind, x)
        if s.den == 1 and all(slope(kind, x + d) == s for d in (1, 2)):
            assert oracle(x + 1) - oracle(x) == s.num


def test_apply_slope():
    assert apply_slope(from_rows([[9]]), Activation.POCKET_TANH, from_rows([[0]])).tolist() == [[18]]
    assert apply_slope(from_rows([[9]]), Activation.POCKET_TANH, from_rows([[200]])).tolist() == [[0]]
    assert apply_slope(from_rows([[-9]]), Activation.POCKET_SIGMOID, from_rows([[100]])).tolist() == [[-1]]


def test_from_name():
    assert Activation.from_name("pocket_tanh") is Activation.POCKET_TANH
    assert Activation.POCKET_RELU8.cli_name == "pocket_relu8"
    with pytest.raises(ValueError):
        Activation.from_name("relu")
