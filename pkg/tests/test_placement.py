import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiergc.errors import (
    ConfigurationError,
    InvalidPlacementError,
    ModeError,
    UnsupportedConfigError,
)
from hiergc.placement import (
    EvalPlan,
    Placement,
    SystemParams,
    assign_randomness,
    compute_replication,
    default_eval_plan,
    generate_placement,
    margins,
    margins_from,
    validate_randomness,
)


def test_worked_example_replication(iii_b, iv_b):
    assert compute_replication(iii_b.placement) == (2, (2, 2, 2))
    assert margins(iii_b.params, iii_b.placement) == (2, (1, 1, 1))
    assert compute_replication(iv_b.placement) == (2, (2, 2, 2, 2))
    assert margins(iv_b.params, iv_b.placement) == (1, (1, 1, 1, 1))


def test_default_eval_plan(iii_b):
    q = iii_b.params.q
    assert iii_b.plan.alpha1 == (1, 2, 3)
    assert iii_b.plan.beta1 == (0, q - 1)
    assert iii_b.plan.beta2 == ((0,),) * 3


def test_margin_violations_name_constraint():
    p = SystemParams(3, 3, s1=1, s2=1, d=4)
    with pytest.raises(ConfigurationError, match="m1 >= 1"):
        margins_from(p, 1, (2, 2, 2))
    with pytest.raises(ConfigurationError, match="m2 >= 1"):
        margins_from(p, 2, (1, 2, 2))


def test_params_validation():
    with pytest.raises(ConfigurationError):
        SystemParams(3, 3, s1=1, a1=1)
    with pytest.raises(ConfigurationError):
        SystemParams(3, 3, s2=1, a2=1)
    with pytest.raises(ConfigurationError):
        SystemParams(3, [3, 3])
    with pytest.raises(ConfigurationError):
        SystemParams(3, 3, a2=1, mode="private")
    with pytest.raises(ConfigurationError):
        SystemParams(3, 3, q=12)
    p = SystemParams(2, [3, 4], s2=[1, 2])
    assert p.N2 == (3, 4) and p.s2 == (1, 2) and p.a2 == (0, 0)
    assert p.with_mode("private").private


def test_private_r1_range():
    p = SystemParams(3, 3, s2=1, mode="private")
    with pytest.raises(UnsupportedConfigError):
        margins_from(p, 3, (2, 2, 2))
    assert margins_from(p, 2, (3, 3, 3)) == (2, (1, 1, 1))


def test_placement_errors():
    with pytest.raises(InvalidPlacementError):
        Placement(2, [[{0}, set()]])
    with pytest.raises(InvalidPlacementError):
        Placement(2, [[{0}, {5}]])
    with pytest.raises(InvalidPlacementError, match="no cluster"):
        compute_replication(Placement(3, [[{0}, {1}]]))
    with pytest.raises(InvalidPlacementError):
        margins(SystemParams(2, 2), Placement(1, [[{0}, {0}]]))


def test_eval_plan_distinctness():
    with pytest.raises(ConfigurationError):
        EvalPlan([1, 2], [2], [[1]], [[0]], 7)
    with pytest.raises(ConfigurationError):
        EvalPlan([1, 2], [0], [[1, 8]], [[0]], 7)  # 8 = 1 mod 7


def test_small_field_rejected():
    p = SystemParams(5, 3, q=5)
    with pytest.raises(ConfigurationError, match="too small"):
        default_eval_plan(p, 2, (1, 1, 1, 1, 1))


grid = st.tuples(
    st.integers(2, 5),  # N1
    st.integers(2, 5),  # N2
    st.integers(1, 12),  # K
    st.data(),
)


@settings(max_examples=80, deadline=None)
@given(grid)
def test_generate_placement_hits_targets(args):
    N1, N2, K, data = args
    r1 = data.draw(st.integers(1, N1))
    r2 = data.draw(st.integers(1, N2))
    p = SystemParams(N1, N2)
    if K * r1 < N1:  # some cluster would get nothing
        with pytest.raises(InvalidPlacementError):
            generate_placement(p, K, r1, r2)
        return
    try:
        pl = generate_placement(p, K, r1, r2)
    except InvalidPlacementError:
        # only legitimate when a cluster has fewer datasets than workers need
        assert min(len([k for k in range(K) if any((k + t) % N1 == n for t in range(r1))]) for n in range(N1)) * r2 < N2
        return
    assert compute_replication(pl) == (r1, (r2,) * N1)


def test_generate_placement_rejects_bad_targets():
    p = SystemParams(3, 3)
    with pytest.raises(ConfigurationError):
        generate_placement(p, 6, 4, 2)
    with pytest.raises(ConfigurationError):
        generate_placement(p, 6, 2, 0)


def test_assign_randomness_modes():
    with pytest.raises(ModeError):
        assign_randomness(SystemParams(4, 3, s2=1), 2)
    with pytest.raises(UnsupportedConfigError):
        assign_randomness(SystemParams(4, 3, s2=1, mode="private"), 4)


def test_worked_example_randomness_plan_is_valid(iv_b):
    assert validate_randomness(iv_b.rand_plan, iv_b.params, 2).passed


@pytest.mark.parametrize("N1", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("N2", [2, 3, 4, 5])
@pytest.mark.parametrize("seed", [None, 1, 2])
def test_assign_randomness_always_valid(N1, N2, seed):
    for s2 in range(N2):
        for s1 in range(N1 - 1):
            p = SystemParams(N1, N2, s1=s1, s2=s2, mode="private")
            for r1 in range(s1 + 1, N1):
                plan = assign_randomness(p, r1, seed)
                report = validate_randomness(plan, p, r1)
                assert report.passed, (N1, N2, s1, s2, r1, report)


def test_assign_randomness_heterogeneous():
    p = SystemParams(4, [5, 3, 4, 3], s2=[1, 0, 2, 1], mode="private")
    for r1 in range(1, 4):
        assert validate_randomness(assign_randomness(p, r1), p, r1).passed


def test_validate_randomness_flags_violations(iv_b):
    from hiergc.placement import RandomnessPlan

    bad = RandomnessPlan(3, [[{0, 1, 2}] * 3] * 4)
    report = validate_randomness(bad, iv_b.params, 2)
    assert not report.passed
    assert not report["cluster_repetition"].passed
    assert not report["min_within_cluster_repetition"].passed
