import json
import math

import numpy as np
import pytest

import ssoc_certify as sc
from ssoc_certify import certify, constants as cn
from ssoc_certify.errors import ConstraintQualificationError


def test_pencil_proportional_matrices():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(8, 8))
    M = A @ A.T + 2 * np.eye(8)
    W = 2.0 * M
    J = rng.normal(size=(3, 8))
    out = sc.reduced_curvature(W, J, M)
    assert out.alpha_hat == pytest.approx(2.0, rel=1e-10)


def test_pencil_scale_invariance(lq_run):
    run = lq_run
    layout = run.dkkt.layout
    prob = sc.builtin_problem("double-integrator-lq")
    W = sc.eval_lagrangian_hessian(prob, layout, run.dkkt.z, run.dkkt.nu)
    J = sc.eval_constraint_jacobian(prob, layout, run.dkkt.z)
    M = sc.variation_gram(layout)
    a1 = sc.reduced_curvature(W, J, M).alpha_hat
    a2 = sc.reduced_curvature(7.3 * W, J, 7.3 * M).alpha_hat
    assert a2 == pytest.approx(a1, rel=1e-10)


def test_rank_deficient_jacobian_raises():
    W = np.eye(4)
    J = np.array([[1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]])
    with pytest.raises(ConstraintQualificationError):
        sc.reduced_curvature(W, J, np.eye(4))


def test_lq_alpha_is_unit_and_stable_across_meshes(lq_problem):
    values = []
    for n in (10, 20, 40):
        run = sc.run_certification(lq_problem, sc.Mesh.uniform(1.0, n), "hermite-simpson")
        values.append(run.certificate.alpha_hat)
    assert all(abs(v - 1.0) <= 1e-9 for v in values)
    spread = max(values) / min(values) - 1.0
    assert spread <= 0.02


def test_lq_alpha_equals_rayleigh_sampling_oracle(lq_run):
    run = lq_run
    layout = run.dkkt.layout
    prob = sc.builtin_problem("double-integrator-lq")
    W = sc.eval_lagrangian_hessian(prob, layout, run.dkkt.z, run.dkkt.nu)
    J = sc.eval_constraint_jacobian(prob, layout, run.dkkt.z)
    M = sc.variation_gram(layout)
    from ssoc_certify.numerics import nullspace_basis

    Z = nullspace_basis(J)
    A = Z.T @ W @ Z
    B = Z.T @ M @ Z
    rng = np.random.default_rng(123)
    Y = rng.normal(size=(10_000, Z.shape[1]))
    num = np.einsum("bi,ij,bj->b", Y, A, Y)
    den = np.einsum("bi,ij,bj->b", Y, B, Y)
    sampled_min = float(np.min(num / den))
    alpha = run.certificate.alpha_hat
    assert alpha <= sampled_min + 1e-9
    assert sampled_min - alpha <= 1e-6


def test_acceptance_zero_residual_limit():
    bundle = cn.ConstantsBundle(C_T=123.0, Gamma_tot=1e3, Lambda=1.0, rho=1.0)
    out = sc.acceptance_test(0.5, bundle, 0.0)
    assert out.threshold == 0.0
    assert out.accepted_inequality
    out2 = sc.acceptance_test(0.0, bundle, 0.0)
    assert not out2.accepted_inequality  # strict inequality


def test_acceptance_hand_rejection():
    bundle = cn.ConstantsBundle(C_T=0.0, Gamma_tot=1e3, Lambda=1.0, rho=1.0)
    out = sc.acceptance_test(1e-6, bundle, 1e-8)
    assert out.threshold == pytest.approx(1e-5)
    assert not out.accepted_inequality


def test_projection_stability_loss_rejects():
    bundle = cn.ConstantsBundle(C_T=1e3, Gamma_tot=1.0, Lambda=1.0, rho=1.0)
    out = sc.acceptance_test(1.0, bundle, 1e-2)  # C_T * E = 10 > 1
    assert not out.projection_ok
    assert not out.accepted_inequality


def test_simplified_test_recorded_when_margin_small():
    bundle = cn.ConstantsBundle(C_T=1.0, Gamma_tot=10.0, Lambda=1.0, rho=1.0)
    out = sc.acceptance_test(1.0, bundle, 0.05)
    assert out.simplified_evaluated
    assert out.simplified_accepted
    assert out.decisive_test == "exact"
    out2 = sc.acceptance_test(1.0, bundle, 0.5)
    assert not out2.simplified_evaluated


def test_paper_arithmetic_chain_values(quad_problem):
    settings = sc.CertifySettings(
        paper_constants=True,
        inject_e_n2=3.27e-14,
        inject_e_inf=7.05e-14,
        inject_alpha=6.29e-4,
    )
    run = sc.run_certification(
        quad_problem, sc.Mesh.uniform(2.0, 35), "hermite-simpson", settings=settings
    )
    cert = run.certificate
    assert 3.2e-11 <= cert.threshold <= 4.7e-11
    assert cert.alpha_cont == pytest.approx(6.29e-4, rel=5e-4)
    assert cert.trust_radius == pytest.approx(2.885e-4, abs=1e-7)
    assert cert.proximity["C_close_E_inf"] == pytest.approx(4.18e-12, abs=1e-14)
    assert cert.proximity["ok"]
    assert cert.accepted


def test_certificate_arithmetic_identities(quad_run):
    cert = quad_run.certificate
    b = quad_run.bundle
    e = cert.certified_e_n2
    assert cert.lhs == cert.alpha_hat * (1.0 - b.C_T * e) ** 2
    assert cert.threshold == b.Gamma_tot * e
    assert cert.alpha_cont == cert.lhs - cert.threshold
    assert cert.trust_radius == cert.alpha_cont / (2.0 * b.Lambda)
    assert cert.accepted == (
        (cert.lhs > cert.threshold) and cert.alpha_cont > 0 and b.rho > 0
    )


def test_flat_second_variation_gives_unbounded_radius(lq_run):
    cert = lq_run.certificate
    assert lq_run.bundle.Lambda == 0.0
    assert cert.trust_radius == math.inf
    assert cert.proximity["ok"]


def test_rejected_certificate_has_no_radius():
    bundle = cn.ConstantsBundle(
        C_T=0.0, Gamma_tot=1e3, Lambda=1.0, rho=1.0, C_close_inf=1.0
    )
    test = sc.acceptance_test(1e-6, bundle, 1e-8)
    curv = certify.CurvatureResult(1e-6, 1e-6, 3)
    rep = _dummy_report()
    cert = sc.finalize_certificate(
        1e-6, curv, bundle, rep, test, 1e-8, 1e-8, "node-quadrature", True, {}
    )
    assert not cert.accepted
    assert cert.trust_radius is None
    assert cert.reject_reason == "curvature below residual threshold"


def _dummy_report():
    from ssoc_certify.residuals import ResidualReport

    return ResidualReport(
        e_dyn_L2=0.0, e_stat_L2=0.0, e_bc=0.0, E_N2=0.0,
        e_dyn_node_L2=0.0, e_stat_node_L2=0.0, E_N2_node=0.0, kkt_node_inf=0.0,
        e_dyn_inf=0.0, e_adj_inf=0.0, e_stat_inf=0.0, E_inf=0.0, E_inf_basic=0.0,
        e_bc_weighted=None, per_interval=[], quad_points=5, inf_samples_per_cell=21,
    )


def test_certificate_json_round_trip(quad_run):
    payload = quad_run.certificate.to_dict()
    text = json.dumps(payload, indent=2, sort_keys=True)
    assert json.dumps(json.loads(text), indent=2, sort_keys=True) == text
