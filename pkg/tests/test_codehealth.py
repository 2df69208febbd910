import math

import pytest
from hypothesis import given, strategies as st

from triage.codehealth import (
    DEFAULT_KNEES,
    SUB_FACTORS,
    Band,
    SubFactorVector,
    WeightConfig,
    analyze_file,
    band_of,
    composite_score,
    dialect_for_path,
)
from triage.errors import AnalysisError, ConfigurationError, DomainError


def test_straight_line_function_has_base_complexity():
    v = analyze_file("int f(int x) {\n    return x;\n}\n", "brace")
    assert v.cyclomatic_max == 1


def test_if_and_while_give_complexity_three():
    src = """
int f(int x) {
    if (x > 0) {
        x = 1;
    }
    while (x < 10) {
        x++;
    }
    return x;
}
"""
    # hand count: if + while = 2 decisions, + 1
    assert analyze_file(src, "brace").cyclomatic_max == 3


def test_if_and_while_python():
    src = "def f(x):\n    if x:\n        x = 1\n    while x < 3:\n        x += 1\n    return x\n"
    assert analyze_file(src, "indent").cyclomatic_max == 3


def test_empty_file_is_zero_vector():
    assert analyze_file("", "brace") == SubFactorVector()
    assert analyze_file("\n\n   \n", "indent") == SubFactorVector()
    assert analyze_file("# only a comment\n", "indent") == SubFactorVector()


def test_keywords_in_strings_and_comments_are_ignored():
    src = 'void g() {\n    // if while for\n    s = "if (a && b) while";\n    /* case catch */\n}\n'
    assert analyze_file(src, "brace").cyclomatic_max == 1
    py = "def g():\n    '''if x and y or z'''\n    s = 'while for'  # if\n    return s\n"
    assert analyze_file(py, "indent").cyclomatic_max == 1


def test_decision_tokens_brace():
    src = """
int h(int a, int b, int c) {
    for (int i = 0; i < a; i++) {
        if (a && b || c) { a = b ? 1 : 2; }
        else if (b) { a = 3; }
    }
    switch (a) { case 1: break; case 2: break; }
    try { a = 1; } catch (Exception e) { a = 2; }
    return a;
}
"""
    v = analyze_file(src, "brace")
    # for, if, &&, ||, ?, if, case, case, catch = 9
    assert v.cyclomatic_max == 10
    assert v.arg_count_max == 3
    assert v.nesting_depth_max == 2


def test_decision_tokens_python():
    src = """
def h(self, a, b=(1, 2), *args, **kw):
    for i in range(a):
        if a and b or kw:
            pass
        elif b:
            pass
    try:
        pass
    except ValueError:
        pass
    return [x for x in args if x]
"""
    v = analyze_file(src, "indent")
    # for, if, and, or, elif, except, for, if = 8
    assert v.cyclomatic_max == 9
    assert v.arg_count_max == 4  # a, b, *args, **kw
    assert v.nesting_depth_max == 2


def test_max_and_mean_over_functions():
    src = "def a():\n    return 1\n\ndef b(x):\n    if x:\n        return 2\n    return 3\n"
    v = analyze_file(src, "indent")
    assert v.cyclomatic_max == 2
    assert v.cyclomatic_mean == 1.5
    assert v.function_length_max == 4
    assert v.file_loc == 6


def test_duplication_ratio_counts_repeated_windows():
    block = [f"x{i} = compute({i})" for i in range(6)]
    lines = block + ["y = 0"] + block
    v = analyze_file("\n".join(lines) + "\n", "indent")
    # both copies of the 6-line window are duplicated: 12 of 13 lines
    assert v.duplication_ratio == pytest.approx(12 / 13)
    assert analyze_file("\n".join(block) + "\n", "indent").duplication_ratio == 0


def test_identifier_shortness():
    v = analyze_file("def fn(a, bb, ccc, dddd):\n    return a\n", "indent")
    # identifiers: fn, a, bb, ccc, dddd -> 3 of 5 shorter than 3
    assert v.identifier_shortness == pytest.approx(3 / 5)


def test_binary_and_unknown_dialect_rejected():
    with pytest.raises(AnalysisError):
        analyze_file(b"\xff\xfe\x00binary", "brace")
    with pytest.raises(AnalysisError):
        analyze_file(42, "brace")
    with pytest.raises(ConfigurationError):
        analyze_file("x = 1", "lisp")
    with pytest.raises(ConfigurationError):
        dialect_for_path("notes.txt")
    assert dialect_for_path("a/b.py") == "indent"
    assert dialect_for_path("x.RS") == "brace"


def test_analysis_is_deterministic(pyrng):
    from conftest import python_module
    src = python_module(pyrng, 5)
    assert analyze_file(src, "indent") == analyze_file(src.encode(), "indent")


# ---------------------------------------------------------------------------
# composite score

def test_zero_vector_scores_ten():
    s = composite_score(SubFactorVector())
    assert s.value == 10.0 and s.band is Band.HEALTHY


def test_saturated_vector_scores_one():
    v = SubFactorVector(**{k: DEFAULT_KNEES[k][1] for k in SUB_FACTORS})
    s = composite_score(v)
    assert s.value == 1.0 and s.band is Band.UNHEALTHY
    assert WeightConfig().total_weight == 9.0


def test_cyclomatic_twenty_hand_evaluation():
    # ramp = (20 - 10) / (30 - 10) = 0.5; weight 2.0 -> penalty 1.0; 10 - 1 = 9.0
    s = composite_score(SubFactorVector(cyclomatic_max=20))
    assert s.value == pytest.approx(9.0, abs=1e-12)
    assert s.band is Band.HEALTHY


def test_negative_weight_rejected():
    weights = dict(WeightConfig().weights, file_loc=-1.0)
    with pytest.raises(ConfigurationError):
        WeightConfig(weights=weights)


@pytest.mark.parametrize("value, band", [
    (10.0, Band.HEALTHY), (9.0, Band.HEALTHY), (8.9, Band.PROBLEMATIC),
    (5.0, Band.PROBLEMATIC), (4.999, Band.UNHEALTHY), (1.0, Band.UNHEALTHY),
])
def test_band_boundaries(value, band):
    assert band_of(value) is band


@pytest.mark.parametrize("value", [0.99, 10.01, math.nan])
def test_band_out_of_range(value):
    with pytest.raises(DomainError):
        band_of(value)


vectors = st.builds(
    SubFactorVector,
    cyclomatic_max=st.floats(0, 100), cyclomatic_mean=st.floats(0, 50),
    file_loc=st.floats(0, 5000), function_length_max=st.floats(0, 500),
    nesting_depth_max=st.floats(0, 20), arg_count_max=st.floats(0, 20),
    duplication_ratio=st.floats(0, 1), identifier_shortness=st.floats(0, 1),
)


@given(vectors, st.sampled_from(SUB_FACTORS), st.floats(0, 1000))
def test_score_monotone_in_each_sub_factor(v, name, bump):
    data = v.as_dict()
    data[name] = min(data[name] + bump, 1.0) if name in ("duplication_ratio", "identifier_shortness") \
        else data[name] + bump
    assert composite_score(SubFactorVector(**data)).value <= composite_score(v).value


@given(vectors)
def test_score_bounded(v):
    assert 1.0 <= composite_score(v).value <= 10.0


@given(st.floats(1.0, 10.0))
def test_band_partition(value):
    bands = [value >= 9.0, 5.0 <= value < 9.0, value < 5.0]
    assert sum(bands) == 1
    assert band_of(value) is [Band.HEALTHY, Band.PROBLEMATIC, Band.UNHEALTHY][bands.index(True)]
