"""Acceptance suite: every shipped guarantee at its stated tolerance.

Run with  pytest tests/test_acceptance.py -v -s  to see one PASS/FAIL line
per criterion.
"""

import itertools
import math

import mpmath
import numpy as np
import pytest

import oracles
from conftest import make_model
from pufkey.data_io import generate_synthetic
from pufkey.fcs import (HammingCode74, RepetitionCode, binary_entropy, enroll,
                        leakage_by_enumeration, rate_region, reconstruct)
from pufkey.pipeline import fit_models, qos_curve
from pufkey.quantizer import (correctness_probability, design_boundaries,
                              elimination_ratio,
                              joint_bit_error_and_memoryless_check)
from pufkey.transforms import (enumerate_seed_matrices, fast_dwht_2d, forward_2d,
                               sample_covariance, decorrelation_efficiency,
                               sylvester_hadamard)

mpmath.mp.dps = 40


def report(criterion: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {criterion}: {detail}"


# (bits, sigma_noise, delta, b0, bmax) spanning m in {1, 2, 3, 5}
SPECS = [
    (1, 0.10, 0.050, -3.0, 3.0),
    (2, 0.20, 0.100, -3.0, 3.0),
    (2, 0.15, 0.080, -2.2, 3.1),
    (3, 0.05, 0.020, -3.0, 3.0),
    (5, 0.02, 0.004, -3.0, 3.0),
]


@pytest.fixture(scope="module")
def array16_models():
    """255 fitted AC coefficient models of a 16x16 synthetic population."""
    population = generate_synthetic(num_devices=64, shape=16,
                                    correlation_length=8.0, mean_freq=100.0,
                                    device_sigma=1.0, noise_sigma=0.05,
                                    repeats=3, seed=160916)
    return fit_models(population, sylvester_hadamard(16))


def test_criterion_1_qos_endpoints(array16_models):
    """delta = 0 keeps every realization: beta = 100 and gamma = 0 exactly."""
    checked = 0
    for model in array16_models.values():
        for m in (3, 5, 7):
            row = qos_curve(model, m, deltas=[0.0])[0]
            assert row.beta_percent == 100.0
            assert row.gamma == 0.0
            assert 0.0 < row.p_c <= 1.0
            checked += 1
    report(1, True, f"beta=100 and gamma=0 exactly at delta=0 for {checked} "
                    "(coefficient, m) pairs")


def test_criterion_2_monotonicity():
    """beta never increases and P_c never decreases along the delta grid."""
    worst_beta_rise = 0.0
    worst_pc_drop = 0.0
    for bits, sigma, _, b0, bmax in SPECS:
        model = make_model(b0, bmax, sigma_noise=sigma)
        rows = qos_curve(model, bits, grid_points=101)
        betas = np.array([r.beta_percent for r in rows])
        pcs = np.array([r.p_c for r in rows])
        worst_beta_rise = max(worst_beta_rise, float(np.max(np.diff(betas))))
        worst_pc_drop = max(worst_pc_drop, float(np.max(-np.diff(pcs))))
    ok = worst_beta_rise <= 1e-9 and worst_pc_drop <= 1e-9
    report(2, ok, f"over 101-point grids: max beta increase {worst_beta_rise:.2e}, "
                  f"max P_c decrease {worst_pc_drop:.2e} (tolerance 1e-9)")


def test_criterion_3_correctness_vs_monte_carlo():
    """Analytic all-bits-correct probability inside 3-sigma of 1e6 samples."""
    details = []
    for i, (bits, sigma, delta, b0, bmax) in enumerate(SPECS):
        spec = design_boundaries(make_model(b0, bmax), bits)
        analytic = correctness_probability(spec, sigma, delta)
        mc, n_acc = oracles.mc_correctness(spec.boundaries, delta, sigma,
                                           seed=3000 + i)
        bound = oracles.binomial_3sigma(analytic, n_acc)
        assert abs(analytic - mc) <= bound, \
            f"m={bits}: |{analytic:.6f} - {mc:.6f}| > {bound:.2e}"
        details.append(f"m={bits}: d={abs(analytic - mc):.1e}<={bound:.1e}")
    report(3, True, "; ".join(details))


def test_criterion_4_elimination_vs_monte_carlo():
    """Analytic elimination ratio inside 3-sigma of 1e6 samples."""
    details = []
    for i, (bits, sigma, delta, b0, bmax) in enumerate(SPECS):
        spec = design_boundaries(make_model(b0, bmax), bits)
        gamma = elimination_ratio(spec, delta)
        frac = oracles.mc_elimination_fraction(spec.boundaries, delta,
                                               seed=4000 + i)
        bound = oracles.binomial_3sigma(gamma, 1_000_000)
        assert abs(gamma - frac) <= bound, \
            f"m={bits}: |{gamma:.6f} - {frac:.6f}| > {bound:.2e}"
        details.append(f"m={bits}: d={abs(gamma - frac):.1e}<={bound:.1e}")
    report(4, True, "; ".join(details))


def test_criterion_5_memorylessness():
    """Joint bit errors deviate from independence; the degenerate limit does not."""
    spec = design_boundaries(make_model(-3.0, 3.0), 2)
    check = joint_bit_error_and_memoryless_check(spec, 0.2, 0.1, tolerance=1e-9)
    degenerate = joint_bit_error_and_memoryless_check(spec, 1e-4, 0.1,
                                                      tolerance=1e-9)
    ok = check.dependent and check.max_dependence > 1e-8 \
        and degenerate.max_dependence <= 1e-9
    report(5, ok, f"max |joint - product| = {check.max_dependence:.3e} > 1e-8; "
                  f"degenerate limit {degenerate.max_dependence:.1e} <= 1e-9")


def test_criterion_6_equal_mass_quantizers(array16_models):
    """Designed intervals carry mass 1/2^m; symmetric 1-bit boundary is 0."""
    worst = 0.0
    cases = [(make_model(b0, bmax), bits) for bits, _, _, b0, bmax in SPECS]
    cases += [(array16_models[j], m)
              for j in (2, 17, 136) for m in (1, 2, 3)]
    for model, bits in cases:
        b = design_boundaries(model, bits).boundaries
        for k in range(1, 2 ** bits + 1):
            mass = oracles.truncated_density_mass(model.b0, model.bmax,
                                                  b[k - 1], b[k])
            worst = max(worst, abs(mass - 1.0 / 2 ** bits))
    symmetric = design_boundaries(make_model(-2.7, 2.7), 1)
    ok = worst <= 1e-9 and symmetric.boundaries[1] == 0.0
    report(6, ok, f"worst interval-mass deviation {worst:.2e} <= 1e-9 over "
                  f"{len(cases)} quantizers; symmetric m=1 boundary at 0 exactly")


def test_criterion_7_fcs_correctness():
    """Exhaustive decode inside the radius; BSC key errors match the tail."""
    for code in (RepetitionCode(3), RepetitionCode(5), HammingCode74()):
        for msg_bits in itertools.product((0, 1), repeat=code.k):
            msg = np.array(msg_bits, dtype=np.uint8)
            x = np.zeros(code.n, dtype=np.uint8)
            w = enroll(x, msg, code)
            for weight in range(code.t + 1):
                for positions in itertools.combinations(range(code.n), weight):
                    y = x.copy()
                    for p in positions:
                        y[p] ^= 1
                    decoded = reconstruct(w, y, code)
                    assert decoded is not None and np.array_equal(decoded, msg)

    details = []
    for code, p, seed in ((RepetitionCode(3), 0.05, 7001),
                          (HammingCode74(), 0.05, 7002)):
        rng = np.random.default_rng(seed)
        trials = 100_000
        errors = 0
        for _ in range(trials):
            x = rng.integers(0, 2, size=code.n).astype(np.uint8)
            s = rng.integers(0, 2, size=code.k).astype(np.uint8)
            y = x ^ (rng.random(code.n) < p).astype(np.uint8)
            decoded = reconstruct(enroll(x, s, code), y, code)
            errors += decoded is None or not np.array_equal(decoded, s)
        tail = oracles.binomial_tail_above(code.n, code.t, p)
        bound = oracles.binomial_3sigma(tail, trials)
        assert abs(errors / trials - tail) <= bound
        details.append(f"(n={code.n},t={code.t}): d={abs(errors / trials - tail):.1e}"
                       f"<={bound:.1e}")
    report(7, True, "exhaustive round-trips ok; BSC " + "; ".join(details))


def test_criterion_8_zero_leakage():
    """Exhaustively enumerated I(helper; key) is exactly zero."""
    codes = [RepetitionCode(3), RepetitionCode(12), HammingCode74()]
    values = [leakage_by_enumeration(c) for c in codes]
    ok = all(v == 0.0 for v in values)
    report(8, ok, f"I(W;S) = {values} bits for n in "
                  f"{[c.n for c in codes]} (uniform inputs, full enumeration)")


def test_criterion_9_rate_region():
    """Boundary identity R_s + R_l = 1 and the optimal corner point."""
    worst = 0.0
    for p in np.linspace(0.0, 1.0, 100):
        opt = rate_region(float(p)).optimal_point
        worst = max(worst, abs(opt.secret_key_rate + opt.privacy_leakage_rate - 1.0))
        hb = float(-mpmath.mpf(p) * mpmath.log(mpmath.mpf(p), 2)
                   - (1 - mpmath.mpf(p)) * mpmath.log(1 - mpmath.mpf(p), 2)) \
            if 0.0 < p < 1.0 else 0.0
        assert abs(opt.secret_key_rate - (1.0 - hb)) <= 1e-12
        assert abs(opt.privacy_leakage_rate - hb) <= 1e-12
    ok = worst <= 1e-12
    report(9, ok, f"max |R_s + R_l - 1| = {worst:.2e} over 100 crossover values; "
                  "optimal point matches (1 - H_b(p), H_b(p))")


def test_criterion_10_transform_suite():
    """Fast transform, exhaustive seed count, and decorrelation strength."""
    rng = np.random.default_rng(1010)
    x = 100.0 + rng.standard_normal((16, 16))
    fast = fast_dwht_2d(x).values
    dense = forward_2d(sylvester_hadamard(16), x).values
    transform_err = float(np.max(np.abs(fast - dense)) / np.max(np.abs(dense)))
    assert transform_err <= 1e-12

    count = len(enumerate_seed_matrices(4))
    oracle_count = len(oracles.brute_force_orthogonal_sign_matrices(4))
    assert count == oracle_count

    population = generate_synthetic(num_devices=300, shape=16,
                                    correlation_length=8.0, mean_freq=100.0,
                                    device_sigma=1.0, noise_sigma=0.0,
                                    repeats=1, seed=901)
    enrollments = [d.enrollment for d in population.devices]
    eff = decorrelation_efficiency(
        sample_covariance(enrollments),
        sample_covariance([fast_dwht_2d(m) for m in enrollments]))
    assert eff > 0.9
    report(10, True, f"fast DWHT within {transform_err:.1e} of dense multiply; "
                     f"seed count {count} = brute-force count; "
                     f"decorrelation efficiency {eff:.3f} > 0.9")
