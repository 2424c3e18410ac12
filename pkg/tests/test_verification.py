"""Tests for the verification tools: manufactured fields, error norms,
the discrete Helmholtz splitting, energy reports and the two studies."""
import numpy as np
import pytest

from mhdpinn.jets import jet_seed
from mhdpinn.network import init_params
from mhdpinn.physics import (PhysicsParams, boundary_terms, div2, residual_B,
                             residual_f)
from mhdpinn.verification.hodge import (GridField, decomposition_report,
                                        gradient, gradient_adjoint,
                                        hodge_decompose, sample_grid_field)
from mhdpinn.verification.mms import mms_default
from mhdpinn.verification.norms import (energy_check, error_norms,
                                        l4l2_distance)
from mhdpinn.verification.studies import loss_error_study, stability_study


# ---------------------------------------------------------------- reference


def test_reference_fields_divergence_free():
    phys = PhysicsParams()
    mms = mms_default(phys)
    rng = np.random.default_rng(0)
    x, y = rng.random(50), rng.random(50)
    t = rng.random(50)
    s = mms(x, y, t)
    assert np.max(np.abs(div2((s.ux, s.uy)))) <= 1e-12
    assert np.max(np.abs(div2((s.Bx, s.By)))) <= 1e-12


def test_reference_boundary_traces():
    phys = PhysicsParams()
    mms = mms_default(phys)
    y = np.linspace(0.0, 1.0, 21)
    t = np.full_like(y, 0.3)
    normals = np.tile([-1.0, 0.0], (y.size, 1))
    (ux, uy), Bn, _ = boundary_terms(mms(np.zeros_like(y), y, t), normals)
    assert np.max(np.abs(ux)) <= 1e-15
    assert np.max(np.abs(uy)) <= 1e-15
    assert np.max(np.abs(Bn)) <= 1e-15


def test_reference_residuals_vanish():
    phys = PhysicsParams(nu=0.8, mu=1.2, S=1.5)
    mms = mms_default(phys)
    rng = np.random.default_rng(1)
    x, y, t = rng.random(200), rng.random(200), rng.random(200)
    s = mms(x, y, t)
    s.fx, s.fy = mms.forcing(x, y, t)
    s.sBx, s.sBy = mms.source(x, y, t)
    rfx, rfy = residual_f(s, phys)
    rbx, rby = residual_B(s, phys)
    for r in (rfx, rfy, rbx, rby):
        assert np.max(np.abs(r)) <= 1e-10


def test_reference_requires_unit_square():
    with pytest.raises(ValueError):
        mms_default(PhysicsParams(domain=(0.0, 2.0, 0.0, 1.0)))


# ---------------------------------------------------------------- norms


def test_error_norms_self_comparison_is_zero():
    phys = PhysicsParams()
    mms = mms_default(phys)
    rep = error_norms(mms, mms, phys, resolution=16, time_slices=5)
    assert rep.sup_u <= 1e-12 and rep.sup_B <= 1e-12
    assert rep.l4_u <= 1e-12 and rep.l4_B <= 1e-12


def test_error_norms_constant_offset():
    """Adding (c, 0) to u shifts the sup error by exactly c * sqrt(|Omega|)."""
    phys = PhysicsParams()
    mms = mms_default(phys)
    c = 0.37

    def shifted(x, y, t):
        s = mms(x, y, t)
        jx, _, _ = jet_seed(x, y, t)
        s.ux = s.ux + 0.0 * jx + c
        return s

    rep = error_norms(shifted, mms, phys, resolution=32, time_slices=5)
    assert abs(rep.sup_u - c) <= 1e-6
    assert rep.sup_B <= 1e-12


def test_error_norms_resolution_stable():
    phys = PhysicsParams()
    mms = mms_default(phys)
    params = init_params([3, 16, 5], seed=2)
    r1 = error_norms(params, mms, phys, resolution=48, time_slices=9)
    r2 = error_norms(params, mms, phys, resolution=96, time_slices=9)
    assert abs(r1.sup_u - r2.sup_u) <= 1e-3 * r2.sup_u
    assert abs(r1.sup_B - r2.sup_B) <= 1e-3 * r2.sup_B


def test_error_norms_input_validation():
    phys = PhysicsParams()
    mms = mms_default(phys)
    with pytest.raises(ValueError):
        error_norms(mms, mms, phys, resolution=2)
    with pytest.raises(ValueError):
        error_norms(mms, mms, phys, time_slices=2)


def test_l4l2_distance_identical_models_zero():
    phys = PhysicsParams()
    params = init_params([3, 8, 5], seed=3)
    du, dB = l4l2_distance(params, params, phys, resolution=16, time_slices=5)
    assert du == 0.0 and dB == 0.0


# ---------------------------------------------------------------- energy


def test_energy_zero_field():
    phys = PhysicsParams()
    params = init_params([3, 8, 5], seed=0)
    params.set_flat(np.zeros(params.n_params()))
    rep = energy_check(params, phys, resolution=16, time_slices=5)
    assert rep.sup_u2 == 0.0 and rep.sup_B2 == 0.0
    assert rep.int_grad_u2 == 0.0 and rep.int_grad_B2 == 0.0
    assert rep.finite and rep.bounded_by(0.0)


def test_energy_reference_closed_form():
    """At t = 0 the reference energies integrate in closed form:
    ||u||^2 = 3/8 and ||B||^2 = 1/2 on the unit square, and the magnetic
    dissipation over [0,1] is pi^2 (1 - e^-2) / 2."""
    phys = PhysicsParams(T=1.0)
    mms = mms_default(phys)
    rep = energy_check(mms, phys, resolution=48, time_slices=17)
    # midpoint quadrature of these trigonometric polynomials is exact
    assert abs(rep.sup_u2 - 3.0 / 8.0) <= 1e-12
    assert abs(rep.sup_B2 - 0.5) <= 1e-12
    target = np.pi**2 * (1.0 - np.exp(-2.0)) / 2.0
    assert abs(rep.int_grad_B2 - target) <= 5e-3 * target
    # velocity dissipation: check against a refined time quadrature
    fine = energy_check(mms, phys, resolution=48, time_slices=65)
    assert abs(rep.int_grad_u2 - fine.int_grad_u2) <= 5e-3 * fine.int_grad_u2


def test_energy_trained_snapshot_finite():
    phys = PhysicsParams()
    params = init_params([3, 16, 5], seed=4)
    rep = energy_check(params, phys, resolution=16, time_slices=5)
    assert rep.finite


# ---------------------------------------------------------------- hodge


def test_gradient_adjoint_exact():
    rng = np.random.default_rng(5)
    N, h = 12, 1.0 / 12
    phi = rng.standard_normal((N, N))
    gx, gy = rng.standard_normal((N, N)), rng.standard_normal((N, N))
    lhs = np.sum(gradient(phi, h)[0] * gx) + np.sum(gradient(phi, h)[1] * gy)
    rhs = np.sum(phi * gradient_adjoint(gx, gy, h))
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_hodge_pure_gradient_field():
    """w = grad(x^2 + y^2) must land almost entirely in the gradient part."""
    field = lambda x, y, t: (2.0 * x, 2.0 * y)
    grid = sample_grid_field(field, 128)
    rep = decomposition_report(grid)
    assert rep["frac_w1"] <= 0.02
    assert rep["frac_w2"] >= 0.98
    assert rep["orthogonality"] <= 1e-8


def test_hodge_divergence_free_field():
    phys = PhysicsParams()
    mms = mms_default(phys)
    grid = sample_grid_field(lambda x, y, t: mms.u_values(x, y, t), 128,
                             t=0.5)
    rep = decomposition_report(grid)
    assert rep["frac_w2"] <= 0.02
    assert rep["orthogonality"] <= 1e-8


def test_hodge_projection_idempotent():
    rng = np.random.default_rng(7)
    N = 32
    w = GridField(N=N, h=1.0 / N, vx=rng.standard_normal((N, N)),
                  vy=rng.standard_normal((N, N)))
    w1, w2 = hodge_decompose(w, tol=1e-12)
    w1b, w2b = hodge_decompose(w1, tol=1e-12)
    assert w2b.norm() <= 1e-8 * w.norm()
    assert np.max(np.abs(w1b.vx - w1.vx)) <= 1e-8
    assert np.max(np.abs(w1b.vy - w1.vy)) <= 1e-8


def test_sample_grid_rejects_non_square():
    with pytest.raises(ValueError):
        sample_grid_field(lambda x, y, t: (x, y), 8,
                          domain=(0.0, 2.0, 0.0, 1.0))


# ---------------------------------------------------------------- studies


def test_loss_error_study_on_synthetic_snapshots():
    """Perturbing the exact solution by growing amounts must produce a
    perfectly monotone loss-to-error relationship."""
    from mhdpinn.loss import LossWeights
    from mhdpinn.sampling import sample_batch
    from mhdpinn.training import RunConfig, train

    config = RunConfig(layer_sizes=(3, 16, 16, 5), m=256, n=64, k=64,
                       iters=2000, eval_every=500, checkpoint_every=500,
                       T=0.5)
    import tempfile
    with tempfile.TemporaryDirectory() as tmp:
        result = train(config, out_dir=tmp)
        # skip the untrained initial snapshot: its loss is dominated by the
        # residual terms and carries no information about the field error
        snapshots = result.checkpoints[1:]
        assert len(snapshots) >= 4
        phys = config.physics()
        mms = mms_default(phys)
        batch = sample_batch(phys.domain, phys.T, 512, 128, 128, seed=99)
        study = loss_error_study(snapshots, mms, phys, batch,
                                 config.weights(), mms.problem_data(),
                                 resolution=24, time_slices=5)
        assert len(study.rows) == len(snapshots)
        assert study.spearman_u >= 0.8
        assert study.spearman_B >= 0.8
        assert study.monotone()


def test_stability_study_zero_delta_and_monotonicity():
    config_kwargs = dict(layer_sizes=(3, 8, 5), m=64, n=32, k=32,
                         iters=150, eval_every=50, T=0.5)
    from mhdpinn.training import RunConfig
    study = stability_study(RunConfig(**config_kwargs),
                            deltas=[0.0, 0.2, 0.4], perturb="f",
                            resolution=16, time_slices=5)
    rows = sorted(study.rows, key=lambda r: r.delta)
    assert rows[0].delta == 0.0
    assert rows[0].model_diff <= 1e-12
    assert study.monotone
    # perturbation sizes grow with delta
    diffs = [r.data_diff for r in rows]
    assert all(b > a for a, b in zip(diffs, diffs[1:]))
