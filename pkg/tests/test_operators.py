import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accretive.errors import DimensionMismatch, DomainViolation, InvalidK, NoValidSamples, NonFiniteOutput
from accretive.operators import (
    TIE,
    VIOLATED,
    Affine,
    Composite,
    DiagonalNonlinear,
    Linear,
    Scalar,
    check_accretive,
    check_contraction,
    check_expansive,
    check_m_accretive,
    check_nonexpansive,
    check_strong_accretive,
    estimate_strong_accretive_k,
    identity,
    operator_from_dict,
    sample_margins,
    sample_tuples,
    strong_lambda_grid,
    zero,
)
from accretive.space import SamplePlan, TwoNorm, WitnessSet

D = 3
NORM = TwoNorm.gram(D)
PLAN = SamplePlan(seed=5, pair_count=400)
BASIS_PLAN = SamplePlan(seed=5, pair_count=400, witness=WitnessSet.standard_basis(D))


def cubic(dim=D, box=(-2.0, 2.0)):
    return DiagonalNonlinear(dim, "cubic", 1.0, 1.0, box=box)


def gauss_solve(M, b):
    """Oracle: Gaussian elimination with partial pivoting."""
    M = np.array(M, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    for c in range(n):
        p = c + int(np.argmax(np.abs(M[c:, c])))
        M[[c, p]], b[[c, p]] = M[[p, c]], b[[p, c]]
        for r in range(c + 1, n):
            f = M[r, c] / M[c, c]
            M[r, c:] -= f * M[c, c:]
            b[r] -= f * b[c]
    x = np.zeros(n)
    for r in range(n - 1, -1, -1):
        x[r] = (b[r] - M[r, r + 1:] @ x[r + 1:]) / M[r, r]
    return x


def bisect(g, target, lo=-10.0, hi=10.0):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestEval:
    def test_identity(self):
        x = np.array([0.3, -2.0, 5.0])
        np.testing.assert_array_equal(identity(D)(x), x)

    def test_affine(self):
        np.testing.assert_array_equal(Affine(np.eye(2), (1.0, 0.0))((0.0, 0.0)), [1.0, 0.0])

    def test_cubic(self):
        np.testing.assert_array_equal(DiagonalNonlinear(2, "cubic")((1.0, 2.0)), [2.0, 10.0])

    def test_odd_power(self):
        T = DiagonalNonlinear(2, "odd_power", a=2.0, b=0.0, power=5)
        np.testing.assert_array_equal(T((1.0, -1.0)), [2.0, -2.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            identity(3)((1.0, 2.0))

    def test_domain_violation_names_point(self):
        T = cubic(box=(-1.0, 1.0))
        with pytest.raises(DomainViolation) as info:
            T(np.array([[0.0, 0.0, 0.0], [0.0, 1.5, 0.0]]))
        np.testing.assert_array_equal(info.value.point, [0.0, 1.5, 0.0])

    def test_non_finite_output(self):
        T = DiagonalNonlinear(2, "odd_power", a=1.0, b=0.0, power=301)
        with pytest.raises(NonFiniteOutput):
            T((1e10, 0.0))

    def test_unknown_tag(self):
        with pytest.raises(ValueError, match="registered"):
            DiagonalNonlinear(2, "sine")

    def test_even_power_rejected(self):
        with pytest.raises(ValueError):
            DiagonalNonlinear(2, "odd_power", power=4)

    def test_composite_arithmetic(self):
        A = np.array([[1.0, 2.0], [0.0, 1.0]])
        T = 2.0 * Linear(A) - identity(2) + np.array([1.0, 1.0])
        x = np.array([0.5, -1.0])
        np.testing.assert_allclose(T(x), 2 * A @ x - x + 1)
        assert isinstance(T, Composite)
        parts = T.affine_parts()
        np.testing.assert_allclose(parts[0], 2 * A - np.eye(2))

    def test_composite_domain_is_intersection(self):
        T = cubic(box=(-2.0, 2.0)) + Scalar(D, 1.0, box=(-1.0, 3.0))
        lo, hi = T.domain()
        np.testing.assert_array_equal(lo, [-1.0] * D)
        np.testing.assert_array_equal(hi, [2.0] * D)


class TestLipschitz:
    def test_linear_is_spectral_norm(self):
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert Linear(A).lipschitz() == pytest.approx(np.linalg.svd(A, compute_uv=False)[0], rel=1e-12)

    def test_cubic_on_box(self):
        assert cubic(box=(-2.0, 2.0)).lipschitz() == pytest.approx(13.0)
        assert cubic(box=(-0.5, 1.0)).lipschitz() == pytest.approx(4.0)

    def test_cubic_without_box(self):
        assert DiagonalNonlinear(2, "cubic").lipschitz() is None

    def test_hint_overrides(self):
        assert DiagonalNonlinear(2, "cubic", lipschitz_hint=7.0).lipschitz() == 7.0

    def test_composite_sums(self):
        T = 2.0 * Scalar(D, -1.5) + cubic(box=(-1.0, 1.0))
        assert T.lipschitz() == pytest.approx(3.0 + 4.0)


class TestSerialization:
    @pytest.mark.parametrize(
        "op",
        [
            Linear(np.array([[1.0, 2.0], [3.0, 4.0]])),
            Affine(np.eye(2), (1.0, -1.0), lipschitz_hint=1.0),
            Scalar(2, 0.4, (0.1, 0.2)),
            DiagonalNonlinear(3, "odd_power", 2.0, 1.0, 5, box=(-1.0, 1.0)),
            0.5 * Scalar(2, 2.0) + DiagonalNonlinear(2, "cubic", box=(-1.0, 1.0)),
        ],
    )
    def test_round_trip(self, op):
        again = operator_from_dict(op.to_dict())
        assert again.to_dict() == op.to_dict()
        x = np.array([0.25, -0.5, 0.75][: op.dim])
        np.testing.assert_array_equal(again(x), op(x))

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            operator_from_dict({"family": "fourier"})


class TestSampling:
    def test_deterministic(self):
        a, b = sample_tuples(PLAN, D), sample_tuples(PLAN, D)
        np.testing.assert_array_equal(a.Z, b.Z)
        np.testing.assert_array_equal(a.X, b.X)

    def test_dependent_tuples_included(self):
        tup = sample_tuples(PLAN, D)
        assert tup.dependent.any()
        i, j = np.argwhere(tup.dependent)[0]
        assert NORM(tup.X[i] - tup.Y[i], tup.Z[i, j]) <= 1e-12

    def test_dependent_tuples_optional(self):
        tup = sample_tuples(PLAN.replace(dependent_tuples=False), D)
        assert not tup.dependent.any()


class TestAccretive:
    def test_positive_scalar_holds_with_exact_margin(self):
        c = 0.7
        tm = sample_margins("accretive", Scalar(D, c), NORM, PLAN)
        lam = np.asarray(tm.lambdas)[None, :, None]
        base = NORM.evaluate((tm.tuples.X - tm.tuples.Y)[:, None, None, :], tm.tuples.Z[:, None, :, :])
        np.testing.assert_allclose(tm.raw, lam * c * base, atol=1e-12)
        assert check_accretive(Scalar(D, c), NORM, PLAN).holds_on_samples

    def test_negative_identity_violated(self):
        rep = check_accretive(-identity(D), NORM, PLAN)
        assert not rep.holds_on_samples
        assert rep.status == VIOLATED
        x, y, z, lam = rep.witness_tuple
        # replaying the witness reproduces the violation
        assert NORM(x - y + lam * (y - x), z) < NORM(x - y, z)

    def test_cubic_holds_on_coordinate_witnesses(self):
        assert check_accretive(cubic(), NORM, BASIS_PLAN).holds_on_samples

    def test_cubic_fails_against_generic_witnesses(self):
        # under a 2-norm, accretivity against every z forces Tx - Ty parallel to x - y
        rep = check_accretive(cubic(), NORM, PLAN)
        assert not rep.holds_on_samples
        x, y, z, lam = rep.witness_tuple
        T = cubic()
        assert NORM(x - y + lam * (T(x) - T(y)), z) < NORM(x - y, z)

    def test_reports_reproducible(self):
        a = check_accretive(cubic(), NORM, PLAN).to_dict()
        b = check_accretive(cubic(), NORM, PLAN).to_dict()
        assert a == b

    def test_first_worst_tuple_wins(self):
        # the zero map ties everywhere at margin 0; the witness is the first tuple
        rep = check_accretive(zero(D), NORM, PLAN)
        tup = sample_tuples(PLAN, D)
        np.testing.assert_array_equal(rep.witness_tuple[0], tup.X[0])
        assert rep.witness_tuple[3] == PLAN.lambda_grid[0]


class TestStrongAccretive:
    def test_identity_holds(self):
        for k in (0.1, 0.5, 0.9):
            assert check_strong_accretive(identity(D), NORM, k, PLAN).holds_on_samples

    def test_zero_violated(self):
        rep = check_strong_accretive(zero(D), NORM, 0.5, PLAN, lambdas=[2.0])
        assert not rep.holds_on_samples

    def test_scalar_threshold(self):
        k = 0.9
        assert check_strong_accretive(Scalar(D, 1 - k), NORM, k, PLAN).holds_on_samples
        assert not check_strong_accretive(Scalar(D, 1 - k - 0.05), NORM, k, PLAN).holds_on_samples

    @pytest.mark.parametrize("k", [0.0, 1.0, 1.5, -0.2])
    def test_invalid_k(self, k):
        with pytest.raises(InvalidK):
            check_strong_accretive(identity(D), NORM, k, PLAN)

    def test_grid_above_k(self):
        assert all(l > 0.95 for l in strong_lambda_grid(0.95))
        assert 2.0 in strong_lambda_grid(0.3)

    def test_lambda_not_above_k(self):
        with pytest.raises(ValueError):
            check_strong_accretive(identity(D), NORM, 0.5, PLAN, lambdas=[0.4])

    def test_estimate_for_scalar(self):
        # c I needs k >= 1 - c exactly
        k = estimate_strong_accretive_k(Scalar(D, 0.4), NORM, PLAN)
        assert k == pytest.approx(0.6 * 1.05, rel=1e-9)
        assert check_strong_accretive(Scalar(D, 0.4), NORM, k, PLAN).holds_on_samples

    def test_estimate_floor(self):
        assert estimate_strong_accretive_k(Scalar(D, 2.0), NORM, PLAN) == 1e-3

    def test_estimate_rejects_non_strong(self):
        with pytest.raises(InvalidK):
            estimate_strong_accretive_k(zero(D), NORM, PLAN)


class TestNonexpansiveExpansive:
    def test_identity_margin_zero(self):
        rep = check_nonexpansive(identity(D), NORM, PLAN)
        assert rep.holds_on_samples
        assert abs(rep.worst_margin) <= 1e-15

    def test_half_identity(self):
        assert check_nonexpansive(Scalar(D, 0.5), NORM, PLAN).holds_on_samples

    def test_double_identity(self):
        assert not check_nonexpansive(Scalar(D, 2.0), NORM, PLAN).holds_on_samples

    def test_expansive_holds_without_dependent_tuples(self):
        assert check_expansive(Scalar(D, 2.0), NORM, PLAN.replace(dependent_tuples=False)).holds_on_samples

    def test_identity_not_strictly_expansive(self):
        rep = check_expansive(identity(D), NORM, PLAN)
        assert not rep.holds_on_samples

    def test_dependent_pairs_flagged_as_tie(self):
        S = identity(D) + 0.5 * Scalar(D, 2.0)
        rep = check_expansive(S, NORM, PLAN)
        assert rep.status == TIE
        assert "dependent" in rep.note
        x, y, z, _ = rep.witness_tuple
        assert NORM(x - y, z) <= 1e-12


class TestContraction:
    def test_half(self):
        rep, k = check_contraction(Scalar(D, 0.5), NORM, PLAN)
        assert k == pytest.approx(0.5, abs=1e-12)
        assert rep.holds_on_samples

    def test_identity_fails(self):
        rep, k = check_contraction(identity(D), NORM, PLAN)
        assert k == pytest.approx(1.0, abs=1e-12)
        assert not rep.holds_on_samples

    def test_affine_shift_irrelevant(self):
        _, k = check_contraction(Affine(0.3 * np.eye(D), (5.0, -1.0, 2.0)), NORM, PLAN)
        assert k == pytest.approx(0.3, abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=D, max_size=D))
    def test_shift_invariance_is_exact(self, c):
        T = 0.5 * cubic(box=(-1.0, 1.0))
        _, k1 = check_contraction(T, NORM, BASIS_PLAN)
        _, k2 = check_contraction(T + np.array(c), NORM, BASIS_PLAN)
        assert k1 == k2

    def test_no_valid_samples(self):
        plan = SamplePlan(seed=0, pair_count=5, box=(0.0, 0.0))
        with pytest.raises(NoValidSamples):
            check_contraction(Scalar(D, 0.5), NORM, plan)


class TestInjectivity:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([1e-3, 0.1, 1.0, 10.0]))
    def test_shifted_operator_separates_points(self, seed, lam):
        T = cubic()
        W = WitnessSet.default(D, seed)
        rng = np.random.default_rng(seed)
        x1, x2 = rng.uniform(-1, 1, (2, D))
        S = identity(D) + lam * T
        from accretive.space import sup_seminorm

        assert sup_seminorm(NORM, S(x1) - S(x2), W) > 0


class TestMAccretive:
    def test_scalar_exact(self):
        c, lam = 2.0, 0.5
        targets = [np.array([1.0, -2.0, 0.5]), np.zeros(D)]
        rep = check_m_accretive(Scalar(D, c), NORM, lam, targets)
        assert rep.supported
        for u, w in zip(rep.solutions, targets):
            np.testing.assert_allclose(u, w / (1 + lam * c), rtol=1e-15)

    def test_linear_against_gaussian_elimination(self):
        rng = np.random.default_rng(8)
        A = rng.standard_normal((D, D))
        lam = 0.3
        targets = list(rng.uniform(-1, 1, (5, D)))
        rep = check_m_accretive(Linear(A), NORM, lam, targets)
        assert all(r <= 1e-10 for r in rep.residuals)
        for u, w in zip(rep.solutions, targets):
            np.testing.assert_allclose(u, gauss_solve(np.eye(D) + lam * A, w), atol=1e-12)

    def test_cubic_against_bisection(self):
        lam = 0.1
        targets = list(np.random.default_rng(9).uniform(-1, 1, (10, D)))
        rep = check_m_accretive(cubic(), NORM, lam, targets)
        assert rep.supported
        for u, w in zip(rep.solutions, targets):
            oracle = [bisect(lambda s: s + lam * (s**3 + s), wi) for wi in w]
            np.testing.assert_allclose(u, oracle, atol=1e-11)

    def test_failures_recorded_not_raised(self):
        # a singular I + lam A is reported per target
        rep = check_m_accretive(Linear(-np.eye(D)), NORM, 1.0, [np.ones(D)])
        assert not rep.supported
        assert "SingularLinearSystem" in rep.failures[0]

    def test_lambda_positive(self):
        with pytest.raises(ValueError):
            check_m_accretive(identity(D), NORM, 0.0, [np.ones(D)])
