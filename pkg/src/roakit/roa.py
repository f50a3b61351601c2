"""End-to-end pipeline orchestration, certificate combination, and area
estimation.

A Certificate fixes a validated pair (gamma1, gamma2) for one Lyapunov
candidate: every trajectory starting in the gamma2 sublevel set reaches the
gamma1 sublevel set.  Certificates over the same system can be combined when
the union of their inner sublevel sets nests inside the intersection of the
outer ones (checked by dense sampling).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import kernels
from .dynamics import (AffineMap, Box, VectorField, builtin_system,
                       jacobian_at_origin, rescale_to_unit_box)
from .koopman import Basis, candidate_for
from .polyapprox import approximate_field, remez_minimax
from .polycore import SparsePoly
from .validity import ValiditySystem, build_validity_system


@dataclass
class Certificate:
    gamma1: float
    gamma2: float
    V: SparsePoly                  # in rescaled coordinates
    validator: str                 # "sos" or "grid"
    system: str
    scale: tuple                   # rescaling map: x_orig = scale * x
    error_models: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not (self.gamma1 < self.gamma2)

    def V_original(self, x) -> float:
        """Candidate evaluated in original coordinates."""
        y = np.asarray(x, dtype=float) / np.asarray(self.scale)
        return self.V(y)

    def V_original_many(self, pts: np.ndarray) -> np.ndarray:
        return self.V.eval_many(np.asarray(pts, float)
                                / np.asarray(self.scale))

    def to_json_dict(self) -> dict:
        return {"gamma1": self.gamma1, "gamma2": self.gamma2,
                "validator": self.validator, "system": self.system,
                "scale": list(self.scale),
                "V": self.V.to_json_dict(),
                "error_models": self.error_models,
                "diagnostics": _jsonable(self.diagnostics)}

    @staticmethod
    def from_json_dict(d: dict) -> "Certificate":
        return Certificate(float(d["gamma1"]), float(d["gamma2"]),
                           SparsePoly.from_json_dict(d["V"]),
                           d["validator"], d["system"], tuple(d["scale"]),
                           d.get("error_models", []),
                           d.get("diagnostics", {}))

    def save(self, path: str):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)

    @staticmethod
    def load(path: str) -> "Certificate":
        with open(path) as fh:
            return Certificate.from_json_dict(json.load(fh))


def _jsonable(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, (bool, int, float, str)):
            out[k] = v
        elif isinstance(v, (np.integer, np.floating)):
            out[k] = v.item()
        elif isinstance(v, dict):
            out[k] = _jsonable(v)
    return out


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

DEFAULT_CONFIG = {
    "system": {"name": "example1"},
    "basis": {"kind": "monomial", "degree": 3},
    "projection": {"kind": "truncation"},
    "approximation": {"kind": "none", "option": 1},
    "candidate_proxy_degree": 12,
    "validator": {"kind": "sos"},
    "seed": 0,
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_system(spec: dict) -> VectorField:
    name = spec["name"]
    if name == "replicator":
        A = np.asarray(spec["A"], dtype=float)
        return builtin_system("replicator", n=A.shape[0], A=A)
    if name in ("example1", "example2", "example3"):
        return builtin_system(name, K=spec.get("K", 0.2))
    if name == "file":
        return vector_field_from_json(spec["definition"])
    raise ValueError(f"unknown system: {name}")


def vector_field_from_json(d: dict) -> VectorField:
    """System definition: polynomial components plus box bounds."""
    comps = [SparsePoly.from_json_dict(c) for c in d["components"]]
    return VectorField(comps, Box(tuple(d["box"]["lo"]), tuple(d["box"]["hi"])),
                       name=d.get("name", "file"))


def run_pipeline(config: dict) -> Certificate:
    """Rescale, build the candidate, proxy what must be polynomial, assemble
    the validity system and run the chosen validator."""
    cfg = _merge(DEFAULT_CONFIG, config)
    seed = int(cfg.get("seed", 0))
    F = load_system(cfg["system"])
    G, amap = rescale_to_unit_box(F)
    approx_spec = dict(cfg["approximation"])
    option = int(approx_spec.pop("option", 1))

    # Option 1: polynomial proxy of the field before candidate construction.
    if approx_spec.get("kind", "none") != "none" and option == 1:
        proxies = approximate_field(G, {**approx_spec, "seed": seed})
        candidate_field = VectorField([p.P for p in proxies], G.domain,
                                      name=G.name + "_proxy")
    else:
        proxies = approximate_field(G, {**approx_spec, "seed": seed})
        candidate_field = G

    basis_spec = cfg["basis"]
    if basis_spec["kind"] == "monomial":
        basis = Basis.monomial(G.dim, int(basis_spec["degree"]))
    else:
        rng = np.random.default_rng(seed)
        N = int(basis_spec.get("count", 25))
        if "centers" in basis_spec:
            centers = np.asarray(basis_spec["centers"], dtype=float)
        else:
            lo = basis_spec.get("center_box_lo", [-1.0] * G.dim)
            hi = basis_spec.get("center_box_hi", [1.0] * G.dim)
            centers = rng.uniform(lo, hi, size=(N, G.dim))
        basis = Basis.gaussian_rbf(centers, float(basis_spec["eta"]))

    proj = cfg["projection"]
    X_pi = None
    if proj.get("X_pi"):
        X_pi = Box(tuple(proj["X_pi"]["lo"]), tuple(proj["X_pi"]["hi"]))
    cand = candidate_for(candidate_field, basis,
                         projection=proj.get("kind", "truncation"),
                         X_pi=X_pi, M=proj.get("M"), seed=seed,
                         alphas=cfg.get("alphas"))

    if cand.poly is None:
        proxy_deg = int(cfg.get("candidate_proxy_degree", 12))
        Vp = remez_minimax(lambda x: cand(x), proxy_deg, G.domain,
                           seed=seed, fix_origin=True).P
    else:
        Vp = cand.poly

    vs = build_validity_system(Vp, proxies, domain=G.domain)
    vspec = cfg["validator"]
    error_models = [a.error_model.to_json_dict() for a in proxies]
    if vspec["kind"] == "sos":
        from .sosval import certify_levels_sos
        res = certify_levels_sos(vs, d_sigma1=vspec.get("d_sigma1"),
                                 d_sigma2=vspec.get("d_sigma2"),
                                 tol=vspec.get("tol", 1e-2),
                                 solver=vspec.get("solver", "CLARABEL"),
                                 gamma1=vspec.get("gamma1"),
                                 gamma2=vspec.get("gamma2"))
        validator = "sos"
        grid = None
    elif vspec["kind"] == "grid":
        from .gridval import build_grid, certify_levels_grid
        grid = build_grid(vs, delta0=vspec.get("delta0"),
                          delta_min=vspec.get("delta_min"))
        res = certify_levels_grid(grid, Vp, G.domain,
                                  tol=vspec.get("tol", 1e-3))
        validator = "grid"
    else:
        raise ValueError(f"unknown validator: {vspec['kind']}")

    diag = {"config_hash": hashlib.sha256(
        json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:16],
        "seed": seed}
    if res is None:
        cert = Certificate(0.0, 0.0, Vp, validator, F.name, amap.scale,
                           error_models, {**diag, "empty": True})
    else:
        g1, g2, d = res
        cert = Certificate(g1, g2, Vp, validator, F.name, amap.scale,
                           error_models, {**diag, **d})
    cert.grid = grid if vspec["kind"] == "grid" else None
    cert.validity_system = vs
    cert.rescaled_field = G
    return cert


# ---------------------------------------------------------------------------
# combination (multiple Lyapunov functions)
# ---------------------------------------------------------------------------


@dataclass
class CombinedCertificate:
    certificates: List[Certificate]
    nesting_verified: bool
    sample_budget: int
    witness: Optional[list] = None   # a violation point, when rejected

    def to_json_dict(self) -> dict:
        return {"certificates": [c.to_json_dict() for c in self.certificates],
                "nesting_verified": self.nesting_verified,
                "sample_budget": self.sample_budget,
                "witness": self.witness}


def combine(certs: Sequence[Certificate],
            sample_budget: int = 100_000, seed: int = 0) -> CombinedCertificate:
    """Verify the nesting hypothesis union(Omega_g1) inside inter(Omega_g2)
    by dense sampling, then emit the combined claim.

    Raises ValueError for mismatched systems; a sampled violation is returned
    as a rejection with its witness point (in rescaled coordinates).
    """
    certs = list(certs)
    if not certs:
        raise ValueError("no certificates to combine")
    if len({c.system for c in certs}) != 1:
        raise ValueError("certificates refer to different systems")
    if len(certs) == 1:
        return CombinedCertificate(certs, True, 0)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(sample_budget, certs[0].V.dim))
    vals = [c.V.eval_many(pts) for c in certs]
    in_union_g1 = np.zeros(sample_budget, dtype=bool)
    for c, v in zip(certs, vals):
        in_union_g1 |= v <= c.gamma1
    in_inter_g2 = np.ones(sample_budget, dtype=bool)
    for c, v in zip(certs, vals):
        in_inter_g2 &= v <= c.gamma2
    bad = in_union_g1 & ~in_inter_g2
    if bad.any():
        w = pts[np.flatnonzero(bad)[0]]
        return CombinedCertificate(certs, False, sample_budget,
                                   witness=[float(v) for v in w])
    return CombinedCertificate(certs, True, sample_budget)


# ---------------------------------------------------------------------------
# area and trajectory oracles
# ---------------------------------------------------------------------------


def certified_area(cert: Certificate, sample_budget: int = 100_000,
                   seed: int = 0):
    """Monte-Carlo fraction of the rescaled domain box covered by the
    certified sublevel set Omega_gamma2; returns (fraction, standard error)."""
    if cert.V.dim > 3:
        raise ValueError("area estimation supported for n <= 3 only")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(sample_budget, cert.V.dim))
    inside = cert.V.eval_many(pts) <= cert.gamma2
    p = float(np.mean(inside))
    se = float(np.sqrt(max(p * (1 - p), 0.0) / sample_budget))
    return p, se


def trajectory_oracle(cert: Certificate, F_rescaled: VectorField,
                      n_samples: int = 500, T: float = 60.0, h: float = 1e-3,
                      seed: int = 0) -> dict:
    """Sample initial conditions in Omega_gamma2 and check each trajectory
    reaches Omega_gamma1 without first leaving Omega_gamma2.

    For gamma1 = 0 the target level is a small fraction of gamma2 (the inner
    set degenerates to the origin).  Returns counts; zero violations and zero
    undecided trajectories is a pass.
    """
    rng = np.random.default_rng(seed)
    target = cert.gamma1 if cert.gamma1 > 0 else 1e-4 * cert.gamma2
    pts = []
    tries = 0
    while len(pts) < n_samples and tries < 500 * n_samples:
        cand_pts = rng.uniform(-1.0, 1.0, size=(n_samples, cert.V.dim))
        vals = cert.V.eval_many(cand_pts)
        good = cand_pts[(vals <= cert.gamma2) & (vals > target)]
        pts.extend(good.tolist())
        tries += n_samples
    pts = np.array(pts[:n_samples])
    if pts.size == 0:
        return {"passed": 0, "violations": 0, "undecided": 0}
    if cert.V.dim == 2 and F_rescaled.is_polynomial:
        e1, c1 = F_rescaled.components[0].arrays()
        e2, c2 = F_rescaled.components[1].arrays()
        ev, cv = cert.V.arrays()
        escape = (10.0 * F_rescaled.domain.diameter()) ** 2
        status = kernels.rk4_field2_trajectories(
            e1, c1, e2, c2, pts, h, int(round(T / h)), ev, cv,
            target, cert.gamma2, escape)
        return {"passed": int(np.sum(status == 1)),
                "violations": int(np.sum(status == -1)),
                "undecided": int(np.sum(status == 0))}
    # generic path: vectorized batch RK4 over all initial conditions
    steps = int(round(T / h))
    escape2 = (10.0 * F_rescaled.domain.diameter()) ** 2
    state = pts.copy()
    active = np.ones(len(pts), dtype=bool)
    status = np.zeros(len(pts), dtype=int)
    for _ in range(steps):
        if not active.any():
            break
        x = state[active]
        k1 = F_rescaled.eval_many(x)
        k2 = F_rescaled.eval_many(x + 0.5 * h * k1)
        k3 = F_rescaled.eval_many(x + 0.5 * h * k2)
        k4 = F_rescaled.eval_many(x + h * k3)
        x = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        state[active] = x
        vals = cert.V.eval_many(x)
        out = ((vals > cert.gamma2 * (1 + 1e-9) + 1e-12)
               | (np.sum(x * x, axis=1) > escape2)
               | ~np.isfinite(vals))
        reached = vals <= target
        idx = np.flatnonzero(active)
        status[idx[out]] = -1
        status[idx[reached & ~out]] = 1
        active[idx[out | reached]] = False
    return {"passed": int(np.sum(status == 1)),
            "violations": int(np.sum(status == -1)),
            "undecided": int(np.sum(status == 0))}
