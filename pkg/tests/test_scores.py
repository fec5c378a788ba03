import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import simple_bundle
from fdeval import (
    ConfidenceVector,
    SoftmaxConfig,
    compute_csf,
    fit_mahalanobis,
    quantize,
    score_mahalanobis,
    softmax,
)
from fdeval.errors import (
    ClassUnderpopulated,
    InvalidParameter,
    MissingFeatures,
    MissingMcdStack,
    SingularCovariance,
    UnknownExternal,
)
from fdeval.scores import CSF_IDS, F16, F32, F64, PRECISIONS, _entropy

ROW_SUM_TOL = {F64: 1e-12, F32: 1e-5, F16: 1e-2}


@st.composite
def logit_matrices(draw, max_n=8, max_c=6, lo=-50.0, hi=50.0):
    n = draw(st.integers(1, max_n))
    c = draw(st.integers(2, max_c))
    vals = draw(
        st.lists(
            st.floats(lo, hi, allow_nan=False, allow_infinity=False),
            min_size=n * c,
            max_size=n * c,
        )
    )
    return np.array(vals, dtype=np.float64).reshape(n, c)


def mp_softmax_max(row, dps=50):
    with mpmath.workdps(dps):
        exps = [mpmath.e ** mpmath.mpf(v) for v in row]
        total = mpmath.fsum(exps)
        return float(max(exps) / total)


def test_softmax_against_high_precision_reference():
    rows = [[2.0, 1.0, 0.0], [0.3, -0.2, 5.5, 1.1], [-3.0, -3.0], [30.0, 0.0, 0.0]]
    for row in rows:
        got = float(np.max(softmax(np.array([row]))))
        assert got == pytest.approx(mp_softmax_max(row), abs=1e-15)


def test_large_gap_rounds_to_one_only_below_f64():
    row = np.array([[30.0, 0.0, 0.0]])
    assert float(np.max(softmax(row, SoftmaxConfig(precision=F16)))) == 1.0
    assert float(np.max(softmax(row, SoftmaxConfig(precision=F32)))) == 1.0
    top64 = float(np.max(softmax(row, SoftmaxConfig(precision=F64))))
    assert top64 < 1.0
    assert top64 == pytest.approx(mp_softmax_max(row[0]), abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(logit_matrices())
def test_softmax_rows_sum_to_one(logits):
    for precision in PRECISIONS:
        p = softmax(logits, SoftmaxConfig(precision=precision))
        assert np.all(p >= 0)
        assert np.max(np.abs(p.sum(axis=-1) - 1.0)) <= ROW_SUM_TOL[precision]


@settings(max_examples=60, deadline=None)
@given(logit_matrices(lo=-20.0, hi=20.0))
def test_reduced_precision_outputs_live_on_their_grid(logits):
    for precision in (F16, F32):
        p = softmax(logits, SoftmaxConfig(precision=precision))
        assert np.array_equal(p, quantize(p, precision))


@settings(max_examples=60, deadline=None)
@given(logit_matrices(lo=-30.0, hi=30.0), st.floats(-15.0, 15.0, allow_nan=False))
def test_softmax_shift_invariance(logits, shift):
    base = softmax(logits)
    shifted = softmax(logits + shift)
    assert np.max(np.abs(base - shifted)) <= 1e-12


def test_softmax_broadcasts_over_stacks():
    rng = np.random.default_rng(3)
    stack = rng.normal(size=(5, 4, 3))
    p = softmax(stack)
    assert p.shape == (5, 4, 3)
    assert np.allclose(p.sum(axis=-1), 1.0, atol=1e-12)
    single = np.stack([softmax(stack[i]) for i in range(5)])
    assert np.array_equal(p, single)


def test_temperature_flattens_toward_uniform():
    row = np.array([[3.0, 1.0, 0.0, -2.0, 0.5]])
    tops = [float(np.max(softmax(row, SoftmaxConfig(temperature=t)))) for t in (0.5, 1, 2, 8, 32, 1e6)]
    for a, b in zip(tops, tops[1:]):
        assert b <= a + 1e-15
    assert tops[-1] == pytest.approx(1 / 5, abs=1e-3)


def test_softmax_config_validation():
    with pytest.raises(InvalidParameter):
        SoftmaxConfig(precision="f8")
    with pytest.raises(InvalidParameter):
        SoftmaxConfig(temperature=0.0)
    with pytest.raises(InvalidParameter):
        quantize(np.ones(3), "f8")


def test_quantize_idempotent():
    rng = np.random.default_rng(5)
    x = rng.normal(size=64) * 100
    for precision in PRECISIONS:
        q = quantize(x, precision)
        assert np.array_equal(q, quantize(q, precision))
    assert np.array_equal(quantize(x, F64), x)


def test_entropy_convention():
    assert _entropy(np.array([[1.0, 0.0, 0.0]]))[0] == 0.0
    c = 7
    uniform = np.full((1, c), 1.0 / c)
    assert _entropy(uniform)[0] == pytest.approx(np.log(c), abs=1e-12)


def test_pe_and_msr_fixtures():
    b = simple_bundle([[50.0, 0.0, 0.0], [0.0, 0.0, 0.0]], [0, 0])
    msr = compute_csf(b, "msr").scores
    pe = compute_csf(b, "pe").scores
    assert msr[0] == pytest.approx(1.0, abs=1e-12)
    assert msr[1] == pytest.approx(1 / 3, abs=1e-12)
    # entropy is stored negated: confident row near 0, uniform row at -ln 3
    assert pe[0] == pytest.approx(0.0, abs=1e-12)
    assert pe[1] == pytest.approx(-np.log(3), abs=1e-12)


def test_mls_ignores_temperature():
    b = simple_bundle([[4.0, -1.0], [0.5, 2.5]], [0, 1])
    hot = compute_csf(b, "mls", SoftmaxConfig(temperature=9.0)).scores
    assert np.array_equal(hot, np.array([4.0, 2.5]))


def test_mcd_with_identical_passes_matches_single_pass():
    rng = np.random.default_rng(8)
    logits = rng.normal(size=(12, 5))
    stack = np.repeat(logits[:, None, :], 4, axis=1)  # power-of-two pass count
    b = simple_bundle(logits, rng.integers(0, 5, 12), mcd_logits=stack)
    assert np.array_equal(compute_csf(b, "mcd-msr").scores, compute_csf(b, "msr").scores)
    assert np.array_equal(compute_csf(b, "mcd-pe").scores, compute_csf(b, "pe").scores)
    assert np.array_equal(compute_csf(b, "mcd-ee").scores, compute_csf(b, "pe").scores)
    assert np.array_equal(compute_csf(b, "mcd-mls").scores, compute_csf(b, "mls").scores)
    mi = compute_csf(b, "mcd-mi").scores
    assert np.max(np.abs(mi)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mcd_mutual_information_nonnegative(seed):
    rng = np.random.default_rng(seed)
    n, t, c = 9, 5, 4
    stack = rng.normal(size=(n, t, c)) * 3
    b = simple_bundle(stack.mean(axis=1), rng.integers(0, c, n), mcd_logits=stack)
    scores = compute_csf(b, "mcd-mi").scores
    # scores are the negated information; raw MI must not go below -1e-12
    assert np.all(scores <= 1e-12)


def test_mcd_requires_stack():
    b = simple_bundle([[1.0, 0.0]], [0])
    for csf in ("mcd-msr", "mcd-pe", "mcd-ee", "mcd-mi", "mcd-mls"):
        with pytest.raises(MissingMcdStack):
            compute_csf(b, csf)


def test_external_scores():
    b = simple_bundle([[1.0, 0.0], [0.0, 1.0]], [0, 1], externals={"demo": np.array([0.4, 0.6])})
    vec = compute_csf(b, "ext:demo")
    assert vec.scores.tolist() == [0.4, 0.6]
    vec.scores[0] = 99.0
    assert b.externals["demo"][0] == 0.4
    with pytest.raises(UnknownExternal):
        compute_csf(b, "ext:missing")
    with pytest.raises(InvalidParameter):
        compute_csf(b, "not-a-csf")


def test_mahalanobis_hand_case():
    feats = np.array([[-1.0, 0.0], [1.0, 0.0], [3.0, 0.0], [5.0, 0.0]])
    labels = np.array([0, 0, 1, 1])
    model = fit_mahalanobis(feats, labels)
    assert np.array_equal(model.class_ids, [0, 1])
    assert np.allclose(model.means, [[0.0, 0.0], [4.0, 0.0]])
    scores = score_mahalanobis(model, np.array([[0.0, 0.0], [2.0, 0.0]])).scores
    # at a class mean the distance vanishes; the midpoint sits 2 units from
    # both means with unit x-variance
    assert scores[0] == 0.0 and not np.signbit(scores[0])
    assert scores[1] == pytest.approx(-4.0, abs=1e-5)


def test_mahalanobis_ridge_handles_degenerate_features():
    feats = np.ones((6, 3))
    labels = np.array([0, 0, 0, 1, 1, 1])
    with pytest.raises(SingularCovariance):
        fit_mahalanobis(feats, labels)  # default ridge scales with trace = 0
    model = fit_mahalanobis(feats, labels, ridge=1e-6)
    scores = score_mahalanobis(model, feats).scores
    assert np.all(np.isfinite(scores))
    assert np.allclose(scores, 0.0, atol=1e-9)


def test_mahalanobis_class_underpopulated():
    feats = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(ClassUnderpopulated, match="class 1"):
        fit_mahalanobis(feats, np.array([0, 0, 1]))


def test_mahalanobis_dimension_guards():
    feats = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [3.0, 1.0]])
    model = fit_mahalanobis(feats, np.array([0, 0, 1, 1]))
    with pytest.raises(InvalidParameter):
        score_mahalanobis(model, np.ones((2, 3)))
    with pytest.raises(InvalidParameter):
        fit_mahalanobis(feats, np.array([0, 0, 1]))


def test_maha_csf_fits_on_inlier_rows_only():
    rng = np.random.default_rng(21)
    inlier_feats = np.concatenate([rng.normal(0, 1, (20, 2)), rng.normal(6, 1, (20, 2))])
    ood_feats = rng.normal(40, 1, (5, 2))
    feats = np.concatenate([inlier_feats, ood_feats])
    labels = np.array([0] * 20 + [1] * 20 + [2] * 5)
    logits = rng.normal(size=(45, 2))
    tags = ["IID"] * 40 + ["NEWCLASS_SEMANTIC"] * 5
    b = simple_bundle(logits, labels, tags=tags, features=feats)
    got = compute_csf(b, "maha").scores
    want = score_mahalanobis(
        fit_mahalanobis(inlier_feats, labels[:40]), feats
    ).scores
    assert np.array_equal(got, want)
    # outliers sit far from every inlier mean
    assert got[40:].max() < got[:40].min()


def test_maha_requires_features():
    b = simple_bundle([[1.0, 0.0]], [0])
    with pytest.raises(MissingFeatures):
        compute_csf(b, "maha")


def test_confidence_vector_carries_mode():
    b = simple_bundle([[1.0, 0.0], [0.0, 1.0]], [0, 1])
    vec = compute_csf(b, "msr", SoftmaxConfig(precision=F16))
    assert isinstance(vec, ConfidenceVector)
    assert vec.precision_mode == F16
    assert vec.csf_id == "msr"
    assert set(CSF_IDS) >= {"msr", "pe", "mls", "maha"}
