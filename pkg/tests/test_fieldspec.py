import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracball.errors import (
    ArityError,
    DimensionMismatch,
    FieldSyntaxError,
    ParseError,
    UnknownIdentifier,
)
from fracball.fieldspec import (
    BinOp,
    Call,
    Neg,
    Num,
    Var,
    parse_expr,
    parse_field,
    parse_vector_field,
    pretty,
    tokenize,
)
from fracball.kernels import ProblemParams

from field_corpus import CORPUS

P2 = ProblemParams(n=2)

def test_corpus_has_fifty_distinct_expressions():
    assert len(CORPUS) == len(set(CORPUS)) == 50


@pytest.mark.parametrize("text", CORPUS)
def test_round_trip_tree_and_values(text):
    e = parse_expr(text, 2)
    again = parse_expr(e.pretty(), 2)
    assert again.ast == e.ast
    assert again.pretty() == e.pretty()
    pts = np.array([[0.1, 0.2], [0.5, -0.3], [-0.7, 0.1], [1.5, 0.5]])
    a, b = e.to_field()(pts), again.to_field()(pts)
    assert np.array_equal(np.isnan(a), np.isnan(b))
    assert np.allclose(a[~np.isnan(a)], b[~np.isnan(b)])


def test_precedence_and_associativity():
    assert parse_expr("2 ^ 3 ^ 2", 2).to_field()(np.zeros(2)) == 512
    assert parse_expr("-x1 ^ 2", 2).to_field()(np.array([3.0, 0])) == -9
    assert parse_expr("1 - 2 - 3", 2).to_field()(np.zeros(2)) == -4
    assert parse_expr("x1 / x2 / 2", 2).to_field()(np.array([8.0, 2.0])) == 2
    assert parse_expr("2^-1", 2).to_field()(np.zeros(2)) == 0.5


def test_delta_power_is_zero_outside_ball():
    f = parse_field("delta^(-0.49)", P2)
    assert f.support == "ball"
    vals = f(np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 0.0]]))
    assert vals[0] == pytest.approx(1.0)
    assert vals[1] == 0.0 and vals[2] == 0.0


@pytest.mark.parametrize("text,support,radial,smooth", [
    ("1", "global", True, "smooth"),
    ("delta", "ball", True, "smooth"),
    ("x1 * inside(1)", "ball", False, "smooth"),
    ("delta + 1", "global", True, "smooth"),
    ("abs(x1) * delta", "ball", False, "C0"),
    ("max(1 - |x|, 0)", "global", True, "C0"),
])
def test_metadata_inference(text, support, radial, smooth):
    e = parse_expr(text, 2)
    assert (e.support, e.radial, e.smoothness) == (support, radial, smooth)


@pytest.mark.parametrize("text,exc,pos", [
    ("1 +", ParseError, 3),
    ("(x1", ParseError, 3),
    ("x1 $ 2", ParseError, 3),
    ("x3", UnknownIdentifier, 0),
    ("1 + foo", UnknownIdentifier, 4),
    ("exp", ParseError, 3),
    ("min(1)", ArityError, 0),
    ("exp(1, 2)", ArityError, 0),
    ("1 2", ParseError, 2),
    ("", ParseError, 0),
])
def test_errors_carry_positions(text, exc, pos):
    with pytest.raises(exc) as info:
        parse_expr(text, 2)
    err = info.value
    assert isinstance(err, FieldSyntaxError)
    assert err.position == pos
    assert f"position {pos}" in str(err)
    assert err.pointer().splitlines()[-1] == " " * pos + "^"
    assert err.exit_code == 2


def test_vector_field_dimension():
    b = parse_vector_field(["0.3", "x1"], P2)
    assert b(np.array([[0.5, 0.0]])).tolist() == [[0.3, 0.5]]
    with pytest.raises(DimensionMismatch):
        parse_vector_field(["1", "2", "3"], P2)


def test_tokenize_norm_token():
    kinds = [t.kind for t in tokenize("| x | + 1")]
    assert kinds[0] == "norm"


# random trees survive print -> parse
leaves = st.one_of(
    st.floats(0, 1e6, allow_nan=False).map(Num),
    st.sampled_from(["x1", "x2", "|x|", "delta", "pi"]).map(Var),
)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
        st.tuples(st.sampled_from(["exp", "log", "sqrt", "abs", "inside"]), children)
        .map(lambda t: Call(t[0], (t[1],))),
        st.tuples(st.sampled_from(["min", "max", "pow"]), children, children)
        .map(lambda t: Call(t[0], (t[1], t[2]))),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@given(trees)
def test_random_tree_round_trip(tree):
    text = pretty(tree)
    assert parse_expr(text, 2).ast == tree
