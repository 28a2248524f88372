import numpy as np
import pytest

from hiergc import codec, gf
from hiergc.codec import Message, partition_pad
from hiergc.errors import AdversaryBudgetExceededError, InvalidInputError, ModeError
from hiergc.placement import SystemParams, default_eval_plan, generate_placement, margins
from oracles import symbolic_c2s

Q = 2147483647


def as_field(table):
    return {key: gf.frac(v, Q) for key, v in table.items()}


# worker (1, j) coefficients in the three-cluster example, keyed (dataset, part), 1-based
WORKERS_III_B = {
    1: {(1, 1): "8/9", (1, 2): "-1/3", (3, 1): "2/3", (3, 2): "-2/9",
        (7, 1): "2/3", (7, 2): "-1/4", (9, 1): "1/2", (9, 2): "-1/6"},
    2: {(1, 1): "4/9", (1, 2): "-1/6", (3, 1): "1/3", (3, 2): "-1/9",
        (4, 1): "-4/3", (4, 2): "1/2", (6, 1): "-1", (6, 2): "1/3"},
    3: {(4, 1): "-8/3", (4, 2): "1", (6, 1): "-2", (6, 2): "2/3",
        (7, 1): "-2/3", (7, 2): "1/4", (9, 1): "-1/2", (9, 2): "1/6"},
}
RELAYS_III_B = {
    1: {(1, 1): "4/3", (1, 2): "-1/2", (3, 1): "1", (3, 2): "-1/3", (4, 1): "4/3", (4, 2): "-1/2",
        (6, 1): "1", (6, 2): "-1/3", (7, 1): "4/3", (7, 2): "-1/2", (9, 1): "1", (9, 2): "-1/3"},
    2: {(1, 1): "1", (1, 2): "-1/2", (2, 1): "-3", (2, 2): "1", (4, 1): "1", (4, 2): "-1/2",
        (5, 1): "-3", (5, 2): "1", (7, 1): "1", (7, 2): "-1/2", (8, 1): "-3", (8, 2): "1"},
    3: {(2, 1): "-8", (2, 2): "3", (3, 1): "-2", (3, 2): "1", (5, 1): "-8", (5, 2): "3",
        (6, 1): "-2", (6, 2): "1", (8, 1): "-8", (8, 2): "3", (9, 1): "-2", (9, 2): "1"},
}
# private four-cluster example: (g coefficients, z coefficients) keyed by 1-based index
WORKERS_IV_B = {
    (1, 1): ({1: "1/3", 3: "3/16"}, {2: "4/9", 3: "1/2"}),
    (1, 2): ({1: "1/6"}, {1: "-3/4", 2: "2/9", 3: "1/2"}),
    (1, 3): ({3: "-3/16"}, {1: "-3/2", 3: "1/2"}),
    (2, 1): ({1: "1/9", 4: "-1/6"}, {1: "2/3", 2: "2/3"}),
    (2, 2): ({1: "1/18"}, {1: "1/3", 2: "2/3"}),
    (2, 3): ({4: "1/6"}, {2: "2/3"}),
    (3, 1): ({2: "2/3", 3: "-1/16"}, {1: "1/2", 3: "-3/2"}),
    (3, 2): ({2: "1/3"}, {1: "1/4", 3: "-3/2"}),
    (3, 3): ({3: "1/16"}, {3: "-3/2"}),
    (4, 1): ({2: "2", 4: "1/2"}, {2: "-8/9", 3: "-4"}),
    (4, 2): ({2: "1"}, {2: "-4/9", 3: "-4"}),
    (4, 3): ({4: "-1/2"}, {3: "-4"}),
}
RELAYS_IV_B = {
    1: ({1: "1/2", 3: "3/8"}, {1: "3/4", 2: "2/3", 3: "1/2"}),
    2: ({1: "1/6", 4: "-1/3"}, {1: "1", 2: "2/3"}),
    3: ({2: "1", 3: "-1/8"}, {1: "3/4", 3: "-3/2"}),
    4: ({2: "3", 4: "1"}, {2: "-4/3", 3: "-4"}),
}


def test_worker_coefficients_iii_b(iii_b):
    for j, table in WORKERS_III_B.items():
        got = codec.worker_coefficients(0, j - 1, iii_b.placement, iii_b.plan, iii_b.params)
        got = {(k + 1, l1 + 1): c for (k, l1, l2), c in got.items()}
        assert got == as_field(table)


def test_relay_coefficients_iii_b(iii_b):
    for n, table in RELAYS_III_B.items():
        got = codec.relay_coefficients(n - 1, iii_b.placement, iii_b.plan, iii_b.params)
        assert {(k + 1, l1 + 1): c for (k, l1), c in got.items()} == as_field(table)


def test_private_coefficients_iv_b(iv_b):
    args = (iv_b.plan, iv_b.params)
    for (n, j), (g, z) in WORKERS_IV_B.items():
        got_g = codec.worker_coefficients(n - 1, j - 1, iv_b.placement, *args)
        got_z = codec.worker_randomness_coefficients(n - 1, j - 1, iv_b.rand_plan, *args)
        assert {k + 1: c for (k, _, _), c in got_g.items()} == as_field(g)
        assert {k + 1: c for (k, _), c in got_z.items()} == as_field(z)
    for n, (g, z) in RELAYS_IV_B.items():
        got_g = codec.relay_coefficients(n - 1, iv_b.placement, *args)
        got_z = codec.relay_randomness_coefficients(n - 1, iv_b.rand_plan, *args)
        assert {k + 1: c for (k, _), c in got_g.items()} == as_field(g)
        assert {k + 1: c for (k, _), c in got_z.items()} == as_field(z)


def encode_all(ex, grads):
    return {
        (n, j): codec.worker_encode(n, j, grads, ex.placement, ex.plan, ex.params)
        for n in range(ex.params.N1)
        for j in range(ex.params.N2[n])
    }


def test_golden_identities(iii_b):
    grads = partition_pad(iii_b.gradients(5), 2, (1, 1, 1), Q)
    msgs = encode_all(iii_b, grads)
    relay1 = codec.relay_aggregate(0, [msgs[0, 0], msgs[0, 1]], iii_b.placement, iii_b.plan, iii_b.params)
    assert np.array_equal(relay1.payload, (2 * msgs[0, 0].payload - msgs[0, 1].payload) % Q)
    relays = [
        codec.relay_aggregate(n, [msgs[n, 0], msgs[n, 1]], iii_b.placement, iii_b.plan, iii_b.params).payload
        for n in range(3)
    ]
    g1 = (3 * relays[0] - 3 * relays[1] + relays[2]) % Q
    g2 = (6 * relays[0] - 8 * relays[1] + 3 * relays[2]) % Q
    total = grads.total()
    assert np.array_equal(np.concatenate([g1, g2]), total)
    decoded = codec.server_decode(
        [Message(("relay", n), v) for n, v in enumerate(relays)], iii_b.placement, iii_b.plan, iii_b.params
    )
    assert np.array_equal(decoded, total)


def test_server_layer_matches_symbolic_oracle(iii_b):
    for n in range(3):
        got = codec.relay_coefficients(n, iii_b.placement, iii_b.plan, iii_b.params)
        want = symbolic_c2s(iii_b.plan.alpha1[n], iii_b.placement, iii_b.plan, Q, 2)
        assert {k: got.get(k, 0) for k in want} == want


@pytest.mark.parametrize("N1,N2,K,r1,r2,s1,a1,s2,a2", [
    (4, 3, 8, 3, 3, 1, 0, 1, 0),
    (5, 4, 10, 4, 4, 0, 1, 0, 1),
    (5, 5, 10, 5, 5, 1, 1, 1, 1),
    (3, 4, 6, 3, 2, 0, 0, 1, 0),
])
def test_symbolic_oracle_generated(N1, N2, K, r1, r2, s1, a1, s2, a2):
    p = SystemParams(N1, N2, s1=s1, a1=a1, s2=s2, a2=a2, d=4)
    pl = generate_placement(p, K, r1, r2)
    m1, _ = margins(p, pl)
    plan = default_eval_plan(p, r1, (r2,) * N1)
    for n in range(N1):
        got = codec.relay_coefficients(n, pl, plan, p)
        want = symbolic_c2s(plan.alpha1[n], pl, plan, Q, m1)
        assert {k: got.get(k, 0) for k in want} == want


def test_locality(iii_b):
    for n in range(3):
        for j in range(3):
            coeffs = codec.worker_coefficients(n, j, iii_b.placement, iii_b.plan, iii_b.params)
            assert {k for k, _, _ in coeffs} <= iii_b.placement.gamma[n][j]


def test_encoding_is_linear(iii_b):
    a, b = iii_b.gradients(1), iii_b.gradients(2)
    ga, gb = (partition_pad(x, 2, (1, 1, 1), Q) for x in (a, b))
    gab = partition_pad((a + 7 * b) % Q, 2, (1, 1, 1), Q)
    ma, mb, mab = encode_all(iii_b, ga), encode_all(iii_b, gb), encode_all(iii_b, gab)
    for key in ma:
        assert np.array_equal(mab[key].payload, (ma[key].payload + 7 * mb[key].payload) % Q)


def test_intra_cluster_degree_bound():
    p = SystemParams(3, 5, a2=1, s2=1, d=6)
    pl = generate_placement(p, 6, 2, 4)
    m1, m2 = margins(p, pl)
    plan = default_eval_plan(p, 2, (4, 4, 4))
    grads = partition_pad(np.random.default_rng(0).integers(0, Q, (6, 6)), m1, m2, Q)
    from hiergc.poly import EvalPoint, interpolate

    for n in range(3):
        msgs = [codec.worker_encode(n, j, grads, pl, plan, p) for j in range(5)]
        poly = interpolate([EvalPoint(plan.alpha2[n][j], m.payload) for j, m in enumerate(msgs)], 5, Q)
        assert poly.degree <= 5 - 2 - 1 - 1


def test_payload_lengths():
    p = SystemParams(3, 4, d=10)
    pl = generate_placement(p, 6, 3, 3)
    m1, m2 = margins(p, pl)
    assert (m1, m2) == (3, (3, 3, 3))
    plan = default_eval_plan(p, 3, (3, 3, 3))
    grads = partition_pad(np.ones((6, 10), dtype=np.int64), m1, m2, Q)
    assert grads.d_padded == 18
    assert len(codec.worker_encode(0, 0, grads, pl, plan, p).payload) == 2
    assert len(codec.relay_reference(0, grads, pl, plan, p)) == 6
    assert codec.padded_length(8, 2, (1, 1, 1)) == 8
    assert codec.padded_length(7, 2, (2, 3)) == 12


def test_mode_errors(iii_b, iv_b):
    grads = partition_pad(iii_b.gradients(), 2, (1, 1, 1), Q)
    with pytest.raises(ModeError):
        codec.worker_encode_private(0, 0, grads, None, iii_b.placement, None, iii_b.plan, iii_b.params)
    g4 = partition_pad(iv_b.gradients(), 1, (1,) * 4, Q)
    with pytest.raises(ModeError):
        codec.worker_encode(0, 0, g4, iv_b.placement, iv_b.plan, iv_b.params)
    with pytest.raises(ModeError):
        codec.server_decode([], iv_b.placement, iv_b.plan, iv_b.params)


def test_relay_rejects_bad_input(iii_b):
    grads = partition_pad(iii_b.gradients(), 2, (1, 1, 1), Q)
    msgs = encode_all(iii_b, grads)
    args = (iii_b.placement, iii_b.plan, iii_b.params)
    with pytest.raises(InvalidInputError):
        codec.relay_aggregate(0, [msgs[1, 0], msgs[0, 1]], *args)
    with pytest.raises(InvalidInputError):
        codec.relay_aggregate(0, [msgs[0, 0], msgs[0, 0]], *args)
    short = Message(("worker", 0, 0), msgs[0, 0].payload[:1])
    with pytest.raises(InvalidInputError):
        codec.relay_aggregate(0, [short, msgs[0, 1]], *args)
    # a single straggler is tolerated, two are not
    with pytest.raises(Exception):
        codec.relay_aggregate(0, [msgs[0, 0]], *args)


def test_adversary_budget_exceeded():
    p = SystemParams(5, 3, a1=1, d=4)
    pl = generate_placement(p, 5, 4, 2)
    m1, m2 = margins(p, pl)
    plan = default_eval_plan(p, 4, (2,) * 5)
    grads = partition_pad(np.random.default_rng(0).integers(0, Q, (5, 4)), m1, m2, Q)
    relays = [Message(("relay", n), codec.relay_reference(n, grads, pl, plan, p)) for n in range(5)]
    ok, bad = codec.server_decode(relays, pl, plan, p, identify=True)
    assert np.array_equal(ok, grads.total()) and bad == frozenset()
    rng = np.random.default_rng(4)
    relays[1] = Message(("relay", 1), rng.integers(0, Q, 2))
    ok, bad = codec.server_decode(relays, pl, plan, p, identify=True)
    assert np.array_equal(ok, grads.total()) and bad == {1}
    relays[3] = Message(("relay", 3), rng.integers(0, Q, 2))
    with pytest.raises(AdversaryBudgetExceededError):
        codec.server_decode(relays, pl, plan, p)


def test_private_relay_matches_reference(iv_b):
    grads = partition_pad(iv_b.gradients(3), 1, (1,) * 4, Q)
    rand = codec.generate_randomness(3, grads.d_padded, 1, Q, seed=9)
    for n in range(4):
        msgs = [
            codec.worker_encode_private(n, j, grads, rand, iv_b.placement, iv_b.rand_plan, iv_b.plan, iv_b.params)
            for j in range(3)
        ]
        for keep in ([0, 1], [0, 2], [1, 2], [0, 1, 2]):
            out = codec.relay_aggregate_private(n, [msgs[j] for j in keep], iv_b.placement, iv_b.plan, iv_b.params)
            ref = codec.relay_reference(n, grads, iv_b.placement, iv_b.plan, iv_b.params, rand, iv_b.rand_plan)
            assert np.array_equal(out.payload, ref)
