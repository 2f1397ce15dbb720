"""Run one configured experiment and collect its tables and summary."""
from __future__ import annotations

import math

import numpy as np

from .analytic import predict_beta, predict_gamma, predict_precession, semicircle_checks
from .config import ExperimentConfig
from .dynamics import (
    PAULI, BlochTrajectory, bloch_initial_state, fit_precession_frequency, frozen_spin_experiment,
    local_stueckelbergian, precession_experiment, relaxation_experiment,
)
from .limits import large_omega_scan
from .model import generate_coupling
from .modubit import build_O, rho_modified_series
from .output import RunResult, Table, trajectory_table
from .projected import (
    ProjectedState, compute_nu, evolve_projected, no_signaling_experiment, spectral_data,
    split_local_generator,
)
from .transcription import real_basis_split


def time_grid(cfg: ExperimentConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.t_end, cfg.samples)


def split_unitary(cfg: ExperimentConfig):
    if cfg.split == "identity":
        return None
    n = cfg.axis
    H = 0.5 * cfg.Omega * (n[0] * PAULI["x"] + n[1] * PAULI["y"] + n[2] * PAULI["z"])
    return real_basis_split(H)


def transverse_decay_time(traj: BlochTrajectory, axis, Omega: float) -> float | None:
    """First time the transverse length stays below ``1/e`` of its start for a full period."""
    n = np.asarray(axis, dtype=float)
    along = traj.b @ n
    perp = np.linalg.norm(traj.b - np.outer(along, n), axis=1)
    if perp[0] <= 0:
        return None
    thr = perp[0] / math.e
    dt = traj.times[1] - traj.times[0]
    w = max(1, int(math.ceil(2 * math.pi / Omega / dt)))
    for k in range(len(perp) - w + 1):
        if perp[k:k + w].max() < thr:
            return float(traj.times[k])
    return None


def model_length(cfg: ExperimentConfig, t: np.ndarray) -> np.ndarray | None:
    """Approximate ``|b|`` from the perturbative envelope and squashed ellipse (z axis only)."""
    if not np.allclose(cfg.axis, (0, 0, 1)):
        return None
    pred = predict_precession(cfg.params.lam, cfg.Omega)
    bx, by, bz = cfg.b0
    r = math.hypot(bx, by)
    ph = pred.xi * cfg.Omega * t + math.atan2(by, bx)
    f = pred.envelope(t)
    return np.sqrt(bz**2 + (r * f) ** 2 * (np.cos(ph) ** 2 + pred.xi**2 * np.sin(ph) ** 2))


def _precession_summary(cfg: ExperimentConfig, traj: BlochTrajectory) -> dict:
    pred = predict_precession(cfg.params.lam, cfg.Omega)
    try:
        w = fit_precession_frequency(traj, cfg.Omega, cfg.fit_periods)
        xi_fit = w / cfg.Omega
    except (ValueError, RuntimeError):
        xi_fit = None
    return {
        "xi_fitted": xi_fit, "xi_predicted": pred.xi,
        "b_min": float(traj.length.min()), "b_final": float(traj.length[-1]),
        "t_star": transverse_decay_time(traj, cfg.axis, cfg.Omega),
        "t_star_predicted": pred.t_star, "tau_predicted": pred.tau,
        "residual_X_max": float(traj.residual_X.max()), "residual_Z_max": float(traj.residual_Z.max()),
        "residual_rms": float(np.sqrt(np.mean(traj.residual_X**2 + traj.residual_Z**2))),
        "lambda": cfg.params.lam,
    }


def _empty_summary() -> dict:
    return {"xi_fitted": None, "b_min": None, "t_star": None}


def run_relax_gamma(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    t = time_grid(cfg)
    res = relaxation_experiment(p, cfg.initial, t)
    cols = {"time": t, "gamma": res.gamma, "beta_I": res.coeffs["I"]}
    if cfg.overlay:
        cols["gamma_predicted"] = predict_gamma(p.s, p.omega, t)
    # settle after the first few coupling oscillations
    late = t >= min(t[-1], 3.0 / max(p.s, 1e-300))
    summary = dict(_empty_summary(), initial=cfg.initial, lam=p.lam,
                   gamma_late_mean=float(res.gamma[late].mean()),
                   gamma_plateau_predicted=1 - p.lam**2,
                   max_abs_deviation=float(np.abs(res.gamma - predict_gamma(p.s, p.omega, t)).max()))
    return RunResult("relax-gamma", {"gamma": Table.from_columns(**cols)}, summary)


def run_relax_beta(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    t = time_grid(cfg)
    res = relaxation_experiment(p, cfg.initial, t)
    cols = {"time": t, "beta_X": res.beta_X, "beta_Z": res.beta_Z, "beta_I": res.coeffs["I"],
            "beta_J": res.coeffs["J"]}
    bx, bz = predict_beta(p.s, p.omega, t)
    if cfg.initial == "Z":
        # a Z start rotates the other way: (Z, X) = env (cos, -sin)
        bx, bz = -bz, bx
    elif cfg.initial == "J":
        bx, bz = np.zeros_like(t), np.zeros_like(t)
    if cfg.overlay:
        cols["beta_X_predicted"] = bx
        cols["beta_Z_predicted"] = bz
    dev = max(np.abs(res.beta_X - bx).max(), np.abs(res.beta_Z - bz).max())
    summary = dict(_empty_summary(), initial=cfg.initial, max_abs_deviation=float(dev))
    return RunResult("relax-beta", {"beta": Table.from_columns(**cols)}, summary)


def run_precess(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    t = time_grid(cfg)
    traj = precession_experiment(p, cfg.Omega, t, axis=cfg.axis, b0=cfg.b0, env=cfg.env,
                                 U_split=split_unitary(cfg))
    tables = {"trajectory": trajectory_table(traj)}
    cols = {"time": t, "|b|": traj.length}
    if cfg.overlay:
        model = model_length(cfg, t)
        if model is not None:
            cols["|b|_model"] = model
            pred = predict_precession(p.lam, cfg.Omega)
            b = pred.bloch(t)
            tables["analytic"] = Table.from_columns(time=t, b_x=b[:, 0], b_y=b[:, 1], b_z=b[:, 2],
                                                    envelope=pred.envelope(t))
    tables["blochlen"] = Table.from_columns(**cols)
    return RunResult("precess", tables, _precession_summary(cfg, traj))


def run_frozen(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    per = max(2, cfg.samples // 4)
    traj = frozen_spin_experiment(p, cfg.Omega, cfg.t_freeze_time, samples_per_segment=per,
                                  freeze_samples=max(2, cfg.samples // 2), axis=cfg.axis)
    q, f_end, _ = traj.meta["segment_ends"]
    during = (traj.times >= q) & (traj.times <= f_end)
    summary = dict(_empty_summary(), b_min=float(traj.length.min()),
                   initial_length=float(traj.length[0]), final_length=float(traj.length[-1]),
                   final_over_initial=float(traj.length[-1] / traj.length[0]),
                   b_y_freeze_spread=float(np.ptp(traj.b_y[during])) if during.any() else 0.0,
                   segment_ends=traj.meta["segment_ends"])
    return RunResult("frozen", {"trajectory": trajectory_table(traj)}, summary)


def _nu_tables(spec) -> tuple[dict, dict]:
    nu = compute_nu(spec)
    per_mode = Table.from_columns(n=np.arange(spec.N), v=nu.v, nu_exact=nu.exact, nu_second=nu.second,
                                  nu_third=nu.third, nu_third_full=nu.third_full)
    lo, hi = float(nu.exact.min()), float(nu.exact.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 1e-6, hi + 1e-6
    edges = np.linspace(lo, hi, 31)
    cols = {"bin_lo": edges[:-1], "bin_hi": edges[1:]}
    for k in ("exact", "third", "third_full"):
        cols[f"count_{k}"] = np.histogram(nu.plus(k), edges)[0]
    sc = semicircle_checks(nu.v)
    stats = {"nu_mean": float(nu.exact.mean()), "nu_std": float(nu.exact.std()),
             "nu_std_predicted": 0.25 * spec.lam**3, "xi_predicted": float(nu.second[0]),
             "v_mean_square": sc.mean_v2, "semicircle_ks": sc.ks_distance}
    return {"nu": per_mode, "nu_hist": Table.from_columns(**cols)}, stats


def precession_rho(cfg: ExperimentConfig) -> np.ndarray:
    return bloch_initial_state(cfg.b0)


def run_projected(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    t = time_grid(cfg)
    coupling = generate_coupling(p.N, p.seed)
    spec = spectral_data(p, coupling)
    S_UA = local_stueckelbergian(cfg.Omega, cfg.axis)
    rho_UA0 = precession_rho(cfg)
    state0 = ProjectedState.from_product(spec, rho_UA0, cfg.env, p.seed)
    ev = evolve_projected(state0, S_UA, t, cfg.nu_mode)
    proj = BlochTrajectory.from_states(t, ev.rho_UA)
    tables = {"projected": trajectory_table(proj)}
    nu_tables, stats = _nu_tables(spec)
    tables.update(nu_tables)
    summary = dict(_precession_summary(cfg, proj), nu_mode=cfg.nu_mode, **stats)
    if cfg.overlay:
        exact = precession_experiment(p, cfg.Omega, t, axis=cfg.axis, b0=cfg.b0, env=cfg.env,
                                      coupling=coupling)
        tables["trajectory"] = trajectory_table(exact)
        cols = {"time": t, "|b|_exact": exact.length, "|b|_projected": proj.length}
        model = model_length(cfg, t)
        if model is not None:
            cols["|b|_model"] = model
        tables["compare"] = Table.from_columns(**cols)
        summary["max_projected_vs_exact"] = float(np.abs(exact.b - proj.b).max())
    return RunResult("projected", tables, summary)


def run_modubit(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    t = time_grid(cfg)
    spec = spectral_data(p)
    frame = build_O(spec)
    state0 = ProjectedState.from_product(spec, precession_rho(cfg), cfg.env, p.seed)
    ev = evolve_projected(state0, local_stueckelbergian(cfg.Omega, cfg.axis), t, cfg.nu_mode)
    raw = BlochTrajectory.from_states(t, ev.rho_UA)
    mod = BlochTrajectory.from_states(t, rho_modified_series(ev))
    rows = trajectory_table(raw, "raw").rows + trajectory_table(mod, "modified").rows
    table = Table(("frame",) + trajectory_table(raw).header, rows)
    summary = dict(_empty_summary(), b_min=float(raw.length.min()),
                   raw_dip=float(1 - raw.length.min()),
                   modified_variation=float(np.ptp(mod.length)),
                   modified_b_min=float(mod.length.min()),
                   orthogonality_residual=frame.orthogonality_residual(),
                   defining_residual_max=float(frame.defining_residuals().max()),
                   lam=p.lam)
    return RunResult("modubit", {"modubit": table}, summary)


def _random_hermitian_2x2(rng: np.random.Generator, strength: float) -> np.ndarray:
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    h = 0.5 * (a + a.conj().T)
    return strength * h / np.linalg.norm(h, 2)


def run_nosignal(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    t = np.linspace(0.0, cfg.t_end, cfg.samples)
    L_A, K_A, _, _ = split_local_generator(local_stueckelbergian(cfg.Omega, cfg.axis))
    rng = np.random.default_rng(np.random.SeedSequence([p.seed, 7]))
    bobs = [(np.zeros((2, 2)), np.zeros((2, 2)))]
    for _ in range(max(0, cfg.n_bobs - 1)):
        h = _random_hermitian_2x2(rng, cfg.bob_strength)
        bobs.append((h.real, h.imag))
    singlet = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)
    sigma0 = np.outer(singlet, singlet.conj())
    modes = ("projected", "exact") if cfg.overlay else ("projected",)
    rows, summary = [], dict(_empty_summary())
    for mode in modes:
        rep = no_signaling_experiment(p, (K_A, L_A), bobs, t, sigma0, mode=mode, observer="A")
        summary[f"max_divergence_{mode}"] = rep.max_divergence
        rows += [(mode, k, d) for k, d in enumerate(rep.divergences)]
    return RunResult("nosignal", {"nosignal": Table(("mode", "bob", "divergence"), rows)}, summary)


def run_limits(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    B = generate_coupling(p.N, p.seed).B
    rep = large_omega_scan(B, local_stueckelbergian(cfg.Omega, cfg.axis), p.s, cfg.omegas, cfg.limit_t)
    table = Table.from_columns(omega=rep.omegas, delta=rep.deltas, envelope=rep.envelope)
    summary = dict(_empty_summary(), slope=rep.slope, split_residual=rep.split_residual,
                   commutes_residual=rep.commutes_residual, t=cfg.limit_t,
                   omegas=rep.omegas, deltas=rep.deltas, envelope=rep.envelope)
    return RunResult("limits", {"limits": table}, summary)


RUNNERS = {
    "relax-gamma": run_relax_gamma, "relax-beta": run_relax_beta, "precess": run_precess,
    "frozen": run_frozen, "projected": run_projected, "modubit": run_modubit,
    "nosignal": run_nosignal, "limits": run_limits,
}


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    exp = cfg.sweep_base if cfg.experiment == "sweep" else cfg.experiment
    return RUNNERS[exp](cfg)
