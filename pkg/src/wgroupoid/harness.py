"""Verification harness: check registry, deterministic runner, fixtures and the CLI.

Every registered check has an id of the form ``module.operation.check``, the
topics it certifies (see :data:`ANCHORS`), the formula it verifies and a
tolerance.  :func:`run` executes the selected suites for every configured
algebra and seed and returns a :class:`SuiteReport`.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import threading
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import suites as S
from . import vb
from . import vbpoisson as vp
from .algebra import AlgebraDescriptor, AlgebraElement, ProjectionElement, partial_inverse, random_projection
from .bundle import bundle_chart, random_bundle_point_in_chart, random_group_element
from .errors import ConfigError, GroupoidError, UnknownCheck, UnknownGenerator
from .groupoid import chart_phi_inv, chart_psi
from .involution import perp_transition, random_partial_isometry, t_family

SCHEMA_VERSION = "1"
DEFAULT_ALGEBRAS = ("M2", "C+M2", "M3")
DEFAULT_SEEDS = (0, 1, 2)
DEFAULT_SUITES = ("algebra", "groupoid", "bundle", "tangent", "algebroid", "poisson", "vb", "involution")
ALL_SUITES = DEFAULT_SUITES + ("negative",)
# a check fails when more than this fraction of its samples left the chart domain
MAX_SKIP_FRACTION = 0.5

# Topics the library certifies.  Each must be claimed by at least one check.
ANCHORS = (
    "partial inverse as |x|^-1 u*",
    "polar decomposition",
    "trace pairing",
    "central projections",
    "partial multiplication and groupoid axioms",
    "left and right supports",
    "lattice chart y_p = (pq)^-1 - p",
    "lattice chart transition",
    "groupoid chart psi_pp~",
    "groupoid chart transition",
    "connected components and equivalence of projections",
    "lattice chart trivial iff p central",
    "principal bundle P0 and its structure group",
    "gauge groupoid arrows and the gauge action",
    "bundle chart (y_p, z_pp0)",
    "tangent bundle chart (a_p, b_p)",
    "tangent chart transition",
    "tangent groupoid chart transition",
    "vertical inclusion I(x, eta) = (eta x, eta)",
    "Atiyah sequence exactness",
    "tangent action of the semidirect product",
    "flow lift and cocycle c_p",
    "algebroid bracket in a chart",
    "algebroid anchor",
    "equivalent global and chart representations of sections",
    "sections f_{V,rho}",
    "canonical one-form and weak symplectic form",
    "canonical Poisson bracket",
    "Hamiltonian fields and the anchor #1",
    "momentum map J0 = phi eta",
    "J1 is a Poisson map onto the Lie-Poisson space",
    "Lie-Poisson bracket",
    "cotangent chart (alpha_p, beta_p, y_p, z_pp0)",
    "momentum map in chart coordinates",
    "chart Poisson bracket",
    "sub-Poisson bracket on invariant functions",
    "iota_* compatibility",
    "reduction of J1^-1(0)",
    "VB-groupoid axioms and interchange law",
    "VB-groupoid core",
    "dual VB-groupoid",
    "short exact sequences of VB-groupoids",
    "anchors #1 and #2 and flat momenta",
    "sharp is a VB-groupoid morphism",
    "quotient VB-groupoids and their Poisson structures",
    "sub-Poisson groupoids",
    "involution J(x) = iota(x)*",
    "partial isometries and unitary charts",
    "orthocomplement on the lattice",
)


@dataclass(frozen=True)
class Check:
    id: str
    suite: str
    anchors: tuple
    formula: str
    fn: object
    tol: float
    samples: int = 10
    components: tuple = ()
    scope: str = "algebra"  # "algebra": every algebra; "global": once per seed; "first-seed"
    expect_fail: bool = False
    group: str = ""

    @property
    def key(self):
        return self.group or self.id


@dataclass
class CheckResult:
    id: str
    suite: str
    anchor: str
    residual: float
    tolerance: float
    samples: int
    skipped: int
    passed: bool
    expected_fail: bool
    wall_time: float
    error: str = ""

    @property
    def status(self):
        return "PASS" if self.passed else "FAIL"


@dataclass
class SuiteReport:
    results: list
    config: dict
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def by_id(self, cid) -> CheckResult:
        for r in self.results:
            if r.id == cid:
                return r
        raise UnknownCheck(cid)

    def to_dict(self, with_times=True) -> dict:
        rows = []
        for r in self.results:
            row = dict(vars(r), status=r.status)
            if not with_times:
                row.pop("wall_time")
            rows.append(row)
        out = {"schema": SCHEMA_VERSION, "config": self.config, "passed": self.passed, "checks": rows}
        if with_times:
            out["wall_time"] = self.wall_time
        return out

    def text(self) -> str:
        lines = []
        for r in self.results:
            flag = " (expected FAIL)" if r.expected_fail else ""
            lines.append(f"{r.status}  {r.id:48s} residual={r.residual:.2e} tol={r.tolerance:.0e} "
                         f"samples={r.samples} skipped={r.skipped} {r.wall_time:.2f}s{flag}"
                         + (f"  [{r.error}]" if r.error else ""))
        lines.append(f"{sum(r.passed for r in self.results)}/{len(self.results)} checks passed "
                     f"in {self.wall_time:.1f}s")
        return "\n".join(lines)


# ================================================================ registry

REGISTRY: dict = {}


def register(*checks):
    for c in checks:
        if c.id in REGISTRY:
            raise ValueError(f"duplicate check id {c.id}")
        REGISTRY[c.id] = c


def _c(id, anchors, formula, fn, tol, samples=10, **kw):
    return Check(id, id.split(".")[0] if "suite" not in kw else kw.pop("suite"),
                 tuple(anchors), formula, fn, tol, samples, **kw)


register(
    _c("algebra.partial_inverse.penrose", ["partial inverse as |x|^-1 u*", "left and right supports"],
       "x g x = x, g x g = g, x g = T(x), g x = S(x), iota(iota(x)) = x", S.algebra_penrose, 1e-9, 40),
    _c("algebra.partial_inverse.literal", ["partial inverse as |x|^-1 u*"],
       "SVD pseudoinverse equals |x|^-1 u* built from an eigendecomposition of x*x",
       S.algebra_literal_inverse, 1e-9, 40),
    _c("algebra.polar_decompose.identities", ["polar decomposition"],
       "x = u|x|, u*u = S(x), |x| u* u = |x|", S.algebra_polar, 1e-9, 40),
    _c("algebra.pairing.trace", ["trace pairing"],
       "<rho, x> = Tr(rho x): matrix-unit Gram is a permutation, entrywise sum agrees",
       S.algebra_pairing, 1e-12, 20),
    _c("algebra.is_central.kills_off_diagonal", ["central projections"],
       "p central iff (1-p) e p = 0 for every matrix unit e", S.algebra_central, 0.0, 30),

    _c("groupoid.compose.axioms", ["partial multiplication and groupoid axioms", "left and right supports"],
       "(xy)z = x(yz), T(x) x = x = x S(x), x iota(x) = T(x), supports of products",
       S.groupoid_axioms, 1e-9, 40),
    _c("groupoid.compose.noncomposable", ["partial multiplication and groupoid axioms"],
       "S(x) != T(y) raises NonComposable", S.groupoid_noncomposable, 0.0, 20),
    _c("groupoid.chart_phi.round_trip", ["lattice chart y_p = (pq)^-1 - p"],
       "phi_p(phi_p^-1(y)) = y, phi_p^-1(phi_p(q)) = q, sigma_p(q) = (pq)^-1",
       S.groupoid_chart_round_trip, 1e-9, 25),
    _c("groupoid.lattice_transition.consistency", ["lattice chart transition"],
       "y_p' = (b + d y_p)(a + c y_p)^-1 agrees with recomputation and composes on triple overlaps",
       S.groupoid_lattice_transition, 1e-8, 25),
    _c("groupoid.chart_psi.round_trip", ["groupoid chart psi_pp~"],
       "psi_pp~ and its inverse are mutually inverse", S.groupoid_psi_round_trip, 1e-9, 25),
    _c("groupoid.groupoid_transition.consistency", ["groupoid chart transition"],
       "z_p'p~' = (a + c y_p) z_pp~ (a~ + c~ y~_p~)^-1 agrees with recomputation and composes",
       S.groupoid_psi_transition, 1e-8, 25),
    _c("groupoid.pi_is_singleton.central", ["lattice chart trivial iff p central", "central projections"],
       "Pi_p = {p} iff p is central", S.groupoid_pi_singleton, 0.0, 25),
    _c("groupoid.component_of.equivalence", ["connected components and equivalence of projections"],
       "arrows lie in the component labelled by the rank vector of their supports",
       S.groupoid_components, 0.0, 20),

    _c("bundle.gauge_arrow.invariance", ["principal bundle P0 and its structure group",
                                         "gauge groupoid arrows and the gauge action"],
       "eta xi^-1 is G0-invariant, functorial, and eta eta^-1 = T(eta)", S.bundle_gauge, 1e-9, 25),
    _c("bundle.bundle_chart.round_trip", ["bundle chart (y_p, z_pp0)", "principal bundle P0 and its structure group"],
       "eta = (p + y_p) z_pp0, z_pp0 = p eta, equivariance z(eta g) = z(eta) g",
       S.bundle_chart_check, 1e-9, 25),

    _c("tangent.t_chart.round_trip", ["tangent bundle chart (a_p, b_p)", "vertical inclusion I(x, eta) = (eta x, eta)"],
       "v = (a_p + (p + y_p) b_p) z_pp0 inverts the chart; vertical vectors have a_p = 0",
       S.tangent_chart_round_trip, 1e-9, 25),
    _c("tangent.t_transition.consistency", ["tangent chart transition"],
       "b_p' = (c a_p + (a + c y_p) b_p)(a + c y_p)^-1 agrees with recomputation and composes",
       S.tangent_transition, 1e-8, 25, components=("recompute", "cocycle"), group="tangent.t_transition"),
    _c("tangent.t_transition.fd", ["tangent chart transition"],
       "a_p' is the derivative of the lattice transition along a_p",
       S.tangent_transition, 1e-6, 25, components=("fd",), group="tangent.t_transition"),
    _c("tangent.tangent_groupoid_transition.fd", ["tangent groupoid chart transition"],
       "the groupoid tangent transition equals the derivative of the chart transition",
       S.tangent_groupoid_fd, 1e-6, 25),
    _c("tangent.horizontal_project.exactness", ["Atiyah sequence exactness", "vertical inclusion I(x, eta) = (eta x, eta)"],
       "I is injective, image I = kernel of the projection, I is equivariant",
       S.tangent_atiyah_exactness, 1e-9, 20),
    _c("tangent.tangent_action.law", ["tangent action of the semidirect product"],
       "((theta, eta).(x, g)).(y, h) = (theta, eta).((x, g)(y, h))", S.tangent_action_law, 1e-9, 25),
    _c("tangent.cocycle.law", ["flow lift and cocycle c_p"],
       "c_p(q, t + s) = c_p(L_s q, t) c_p(q, s), S o L_t = S", S.tangent_cocycle_law, 1e-8, 15),
    _c("tangent.cocycle.frames_exact", ["flow lift and cocycle c_p"],
       "c_p(q, t) = z(t) z(0)^-1 along the flow", S.tangent_cocycle_frames, 1e-8, 15,
       components=("frame",), group="tangent.cocycle.frames"),
    _c("tangent.cocycle.frames_fd", ["flow lift and cocycle c_p", "algebroid anchor"],
       "b_p is the derivative of c_p, and transports z along the flow", S.tangent_cocycle_frames, 1e-6, 15,
       components=("generator", "groupoid_frame"), group="tangent.cocycle.frames"),

    _c("algebroid.bracket_chart.jacobi", ["algebroid bracket in a chart"],
       "[[X1, X2], X3] + cyclic = 0 for polynomial sections", S.algebroid_jacobi, 1e-8, 10),
    _c("algebroid.anchor.morphism", ["algebroid anchor"],
       "a([X1, X2]) = [a(X1), a(X2)] against a finite-difference commutator",
       S.algebroid_anchor_morphism, 1e-6, 10),
    _c("algebroid.bracket_chart.leibniz", ["algebroid bracket in a chart", "algebroid anchor"],
       "[X1, f X2] = f [X1, X2] + a(X1)(f) X2", S.algebroid_leibniz, 1e-8, 10),
    _c("algebroid.bracket_global.cross_representation",
       ["equivalent global and chart representations of sections"],
       "chart and global brackets agree; linear sections give (w2 w1 - w1 w2) eta",
       S.algebroid_cross_representation, 1e-7, 10),
    _c("algebroid.atiyah_a.exactness", ["Atiyah sequence exactness"],
       "qMq -> Mq -> (1-q)Mq is exact", S.algebroid_atiyah, 0.0, 10),
    _c("algebroid.f_V_rho.bracket", ["sections f_{V,rho}", "canonical Poisson bracket"],
       "{f_V1, f_V2} = f_[V1,V2], and with invariant rho the extra part is V1(rho2) - V2(rho1)",
       S.algebroid_f_V_rho, 1e-9, 10),

    _c("poisson.pbracket.jacobi", ["canonical Poisson bracket"],
       "Jacobi, antisymmetry and Leibniz for <g_eta, f_phi> - <f_eta, g_phi>", S.poisson_algebra, 1e-9, 35),
    _c("poisson.hamiltonian_field.forms_exact",
       ["canonical one-form and weak symplectic form", "Hamiltonian fields and the anchor #1"],
       "omega(X_f, .) = -df, X_f = #1(df), flat inverts #1, X_f(g) = {f, g}",
       S.poisson_forms, 1e-9, 15, components=("hamiltonian", "anchor", "flat", "bracket_field"),
       group="poisson.forms"),
    _c("poisson.symplectic_two_form.fd", ["canonical one-form and weak symplectic form"],
       "d gamma = omega by finite differences", S.poisson_forms, 1e-6, 15,
       components=("two_form_fd",), group="poisson.forms"),
    _c("poisson.momentum_J0.exact", ["momentum map J0 = phi eta", "momentum map in chart coordinates"],
       "J0(g^-1 phi, eta g) = g^-1 J0 g; chart form z^-1 beta_p z equals phi eta",
       S.poisson_momentum, 1e-9, 15, components=("equivariance", "coords"), group="poisson.momentum"),
    _c("poisson.momentum_J0.flow", ["momentum map J0 = phi eta"],
       "X of <J0, x> generates (e^-tx phi, eta e^tx)", S.poisson_momentum, 1e-6, 15,
       components=("flow",), group="poisson.momentum"),
    _c("poisson.check_J1_poisson", ["J1 is a Poisson map onto the Lie-Poisson space"],
       "{F o J1, G o J1} = {F, G}_LP o J1 for linear and quadratic F, G", S.poisson_J1, 1e-9, 25),
    _c("poisson.check_J1_poisson.polarity", ["J1 is a Poisson map onto the Lie-Poisson space"],
       "pullbacks by J1 Poisson-commute with G0-invariant functions", S.poisson_polarity, 1e-9, 25),
    _c("poisson.J1_jacobian_rank.full", ["J1 is a Poisson map onto the Lie-Poisson space"],
       "the Jacobian of J1 has full rank, and J1(beta, p0) = beta", S.poisson_J1_rank, 1e-9, 6),
    _c("poisson.momentum_JR.left_right", ["Lie-Poisson bracket", "J1 is a Poisson map onto the Lie-Poisson space"],
       "with p0 = 1, J_L is Poisson, J_R anti-Poisson, and their pullbacks commute",
       S.poisson_left_right, 1e-9, 10),
    _c("poisson.cotangent_chart.consistency", ["cotangent chart (alpha_p, beta_p, y_p, z_pp0)"],
       "round trip, transition vs recomputation, cocycle, and duality with the tangent chart",
       S.poisson_cotangent_atlas, 1e-8, 25),
    _c("poisson.chart_bracket.transport", ["chart Poisson bracket", "Lie-Poisson bracket"],
       "chart bracket equals the transported canonical bracket, satisfies Jacobi, and reduces "
       "to <beta, [dF, dG]> on beta", S.poisson_chart_bracket, 1e-9, 10),
    _c("poisson.lp_bracket.jacobi", ["Lie-Poisson bracket"],
       "<beta, [dF, dG]> is Lie and Tr(beta^2) is a Casimir", S.poisson_lie_poisson, 1e-9, 10),
    _c("poisson.sp_bracket.iota_star", ["sub-Poisson bracket on invariant functions", "iota_* compatibility"],
       "{F o iota_*, G o iota_*} = {F, G}_sP o iota_* for invariant F, G", S.poisson_iota_star, 1e-9, 10),
    _c("poisson.mw_reduction_check", ["reduction of J1^-1(0)"],
       "a_*p lands in J1^-1(0) and pulls gamma back to the canonical form", S.poisson_reduction, 1e-8, 10),

    _c("vb.exact_sequence_check", ["short exact sequences of VB-groupoids"],
       "I2, A2 and their duals are morphisms and the sequences are exact", S.vb_exact_sequence, 1e-10, 5),
    _c("vb.momentum_J2.flat", ["anchors #1 and #2 and flat momenta"],
       "J2 vanishes on units, J1_flat kills differentials of invariants, J_flat reduces to J2",
       S.vb_momenta, 1e-10, 10),
    _c("vb.sharp_morphism_check", ["sharp is a VB-groupoid morphism", "anchors #1 and #2 and flat momenta"],
       "TS~_* o #2 = #1 o T*S~_* and the other structure maps", S.vb_sharp, 1e-12, 10),
    _c("vb.quotient_morphism_check", ["quotient VB-groupoids and their Poisson structures"],
       "sharp descends to the quotients", S.vb_quotient_morphism, 1e-9, 5),
    _c("vb.quotient_structure_check", ["quotient VB-groupoids and their Poisson structures"],
       "the quotient groupoid laws in coordinates", S.vb_scalar(vp.quotient_structure_check), 1e-10, 5),
    _c("vb.middle_vs_pair_check", ["quotient VB-groupoids and their Poisson structures"],
       "middle chart bracket equals the transported pair bracket",
       S.vb_scalar(vp.middle_vs_pair_check), 1e-9, 5),
    _c("vb.exactness_check", ["quotient VB-groupoids and their Poisson structures"],
       "iota*_2 o a*_2 has zero chi-part", S.vb_scalar(vp.exactness_check), 1e-10, 5),
    _c("vb.a_star_2_poisson_check", ["quotient VB-groupoids and their Poisson structures"],
       "a*_2 is Poisson", S.vb_scalar(vp.a_star_2_poisson_check), 1e-9, 5),
    _c("vb.iota_star_2_poisson_check", ["quotient VB-groupoids and their Poisson structures"],
       "iota*_2 is Poisson", S.vb_scalar(vp.iota_star_2_poisson_check), 1e-9, 5),
    _c("vb.pair_bracket.jacobi", ["anchors #1 and #2 and flat momenta"],
       "the pair bracket satisfies Jacobi", S.vb_pair_bracket, 1e-9, 10,
       components=("jacobi",), group="vb.pair_bracket"),
    _c("vb.pair_bracket.tangency", ["anchors #1 and #2 and flat momenta"],
       "#2 of invariant differentials is tangent to J2^-1(0)", S.vb_pair_bracket, 1e-6, 10,
       components=("tangency",), group="vb.pair_bracket"),
)

for _kind in ("rightmost", "middle", "gauge-cotangent"):
    register(_c(f"vb.jacobi_check.{_kind}", ["quotient VB-groupoids and their Poisson structures"],
                f"Jacobi for the {_kind} coordinate bracket, including -<chi_p, [dF, dG]>",
                S.vb_scalar(vp.jacobi_check, _kind), 1e-9, 5))
for _name in vb.CATALOGUE:
    register(_c(f"vb.vb_check.{_name}", ["VB-groupoid axioms and interchange law"],
                "groupoid laws, fibrewise linearity, projection and zero morphisms, interchange law",
                S.vb_axioms(_name), 1e-10, 5))
for _name, _short in (("action", "action"), ("tangent-pair", "pair"), ("tangent-quotient", "quotient")):
    register(_c(f"vb.core_compute.{_short}", ["VB-groupoid core"],
                f"core of the {_name} VB-groupoid has the predicted fibre dimension",
                S.vb_core(_name), 1e-10, 1))
for _name in vb.DUAL_PAIRS:
    register(_c(f"vb.dualize.{_name}", ["dual VB-groupoid"],
                f"generic dual of {_name} equals the hand-written {vb.DUAL_PAIRS[_name]}",
                S.vb_dualize(_name), 1e-10, 4))
    register(_c(f"vb.dualize.involutive.{_name}", ["dual VB-groupoid"],
                f"dual of the dual of {_name} equals {_name}", S.vb_double_dual(_name), 1e-10, 2,
                scope="first-seed"))
for _gid in vp.SUB_POISSON_GROUPOIDS:
    register(_c(f"vb.sub_poisson_groupoid_check.{_gid}", ["sub-Poisson groupoids"],
                "structure maps are sub-Poisson and #2 is a morphism on the sub-groupoid",
                S.vb_sub_poisson(_gid), 1e-9, 10))

register(
    _c("involution.is_j_fixed.characterization", ["involution J(x) = iota(x)*", "partial isometries and unitary charts"],
       "J(x) = x iff x is a partial isometry", S.involution_fixed_points, 0.0, 112),
    _c("involution.j_involution.automorphism", ["involution J(x) = iota(x)*"],
       "J o J = id, J(xy) = J(x) J(y), J(e12) = e12, J(2 e12) = e12 / 2", S.involution_automorphism, 1e-9, 20),
    _c("involution.unitary_chart.consistency", ["partial isometries and unitary charts"],
       "h Hermitian, chart inverts, isometric component is J-fixed", S.involution_unitary_chart, 1e-9, 15),
    _c("involution.unitary_chart.log_example", ["partial isometries and unitary charts"],
       "z = e^{i theta} e11 gives h = theta e11", S.involution_log_examples, 1e-12, 10, scope="global"),
    _c("involution.perp_transition.oracle", ["orthocomplement on the lattice"],
       "y_perp agrees with the direct chart of 1 - q and has the orthocomplement range",
       S.involution_perp, 1e-9, 25),
    _c("involution.perp_transition.t_family", ["orthocomplement on the lattice"],
       "p = e11, y = t e21 gives y_perp = -t e12", S.involution_t_family, 1e-12, 3, scope="global"),
    _c("involution.unitary_gauge_arrow_check", ["involution J(x) = iota(x)*", "gauge groupoid arrows and the gauge action"],
       "gauge arrows of partial isometries are J-fixed and U0-invariant", S.involution_gauge, 1e-9, 10),
)

register(
    _c("negative.vb_check.corrupted", ["VB-groupoid axioms and interchange law"],
       "a corrupted product must break the groupoid laws", S.negative_vb, 1e-10, 5,
       suite="negative", expect_fail=True),
    _c("negative.sharp_morphism_check.flipped", ["sharp is a VB-groupoid morphism"],
       "a sign-flipped #2 must fail the morphism equalities", S.negative_sharp, 1e-12, 5,
       suite="negative", expect_fail=True),
    _c("negative.core_compute.corrupted", ["VB-groupoid core"],
       "a corrupted groupoid must fail its axioms", S.negative_core, 1e-10, 5,
       suite="negative", expect_fail=True),
    _c("negative.perp_transition.flipped", ["orthocomplement on the lattice"],
       "a sign-flipped perp formula must miss the t-family", S.negative_perp, 1e-12, 3,
       suite="negative", scope="global", expect_fail=True),
    *[_c(f"negative.sub_poisson_groupoid_check.{g}", ["sub-Poisson groupoids"],
         "a leaky sub-groupoid must fail", S.negative_sub_poisson(g), 1e-9, 5,
         suite="negative", expect_fail=True) for g in vp.SUB_POISSON_GROUPOIDS],
)


def coverage() -> dict:
    """anchor -> ids of the checks that claim it."""
    out = {a: [] for a in ANCHORS}
    for c in REGISTRY.values():
        for a in c.anchors:
            if a not in out:
                raise ValueError(f"check {c.id} claims unknown anchor {a!r}")
            out[a].append(c.id)
    return out


def explain(check_id: str) -> str:
    try:
        c = REGISTRY[check_id]
    except KeyError:
        raise UnknownCheck(check_id) from None
    lines = [c.id, f"  suite:     {c.suite}", f"  anchors:   {'; '.join(c.anchors)}",
             f"  formula:   {c.formula}", f"  tolerance: {c.tol:g}", f"  samples:   {c.samples} per algebra and seed"]
    if c.expect_fail:
        lines.append("  negative control: expected to FAIL")
    return "\n".join(lines)


def list_checks(suites=None) -> list:
    return [c.id for c in REGISTRY.values() if suites is None or c.suite in suites]


# ================================================================ config and runner

@dataclass
class SuiteConfig:
    algebras: tuple = DEFAULT_ALGEBRAS
    seeds: tuple = DEFAULT_SEEDS
    suites: tuple = DEFAULT_SUITES
    p0_ranks: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    tol_scale: float = 1.0
    checks: tuple = ()

    def __post_init__(self):
        if isinstance(self.algebras, str):
            self.algebras = (self.algebras,)
        if isinstance(self.suites, str):
            self.suites = tuple(s for s in self.suites.split(",") if s)
        self.algebras, self.seeds, self.suites = tuple(self.algebras), tuple(self.seeds), tuple(self.suites)
        if not self.algebras:
            raise ConfigError("at least one algebra is required")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not self.suites:
            raise ConfigError("empty suite selection")
        unknown = set(self.suites) - set(ALL_SUITES)
        if unknown:
            raise ConfigError(f"unknown suites {sorted(unknown)}")
        for k, n in self.samples.items():
            if int(n) < 1:
                raise ConfigError(f"sample count for {k} must be at least 1")
        if not self.tol_scale > 0:
            raise ConfigError("tol_scale must be positive")
        try:
            self.descriptors = [_descriptor(a) for a in self.algebras]
        except (GroupoidError, ValueError, TypeError) as e:
            raise ConfigError(f"invalid algebra: {e}") from None
        for cid in self.checks:
            if cid not in REGISTRY:
                raise ConfigError(f"unknown check {cid}")
        if not self.selected():
            raise ConfigError("the selection contains no checks")

    @classmethod
    def from_dict(cls, d: dict) -> "SuiteConfig":
        allowed = {"algebras", "seeds", "suites", "p0_ranks", "samples", "tolerances", "tol_scale", "checks"}
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SuiteConfig":
        try:
            with open(path) as f:
                return cls.from_dict(json.load(f))
        except (OSError, json.JSONDecodeError, TypeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None

    def to_dict(self) -> dict:
        return {"algebras": [repr(d) for d in self.descriptors],
                "seeds": list(self.seeds), "suites": list(self.suites), "p0_ranks": self.p0_ranks,
                "samples": self.samples, "tolerances": self.tolerances, "tol_scale": self.tol_scale,
                "checks": list(self.checks)}

    def selected(self) -> list:
        return [c for c in REGISTRY.values()
                if c.suite in self.suites and (not self.checks or c.id in self.checks)]

    def n_samples(self, c: Check) -> int:
        for key in (c.id, c.suite):
            if key in self.samples:
                return int(self.samples[key])
        return c.samples

    def tolerance(self, c: Check) -> float:
        for key in (c.id, c.suite):
            if key in self.tolerances:
                return float(self.tolerances[key]) * self.tol_scale
        return c.tol * self.tol_scale


def _descriptor(a) -> AlgebraDescriptor:
    if isinstance(a, AlgebraDescriptor):
        return a
    if isinstance(a, str):
        return AlgebraDescriptor.parse(a)
    return AlgebraDescriptor(a)


def _p0(config: SuiteConfig, desc: AlgebraDescriptor, seed: int):
    name = repr(desc)
    rv = config.p0_ranks.get(name)
    if rv is None:
        rv = tuple(max(1, n // 2) for n in desc.block_dims)
    rv = tuple(int(r) for r in rv)
    if len(rv) != desc.n_blocks or any(not 0 <= r <= n for r, n in zip(rv, desc.block_dims)) or not any(rv):
        raise ConfigError(f"invalid p0 rank vector {rv} for {name}")
    return random_projection(desc, rv, np.random.default_rng([seed, zlib.crc32(name.encode()), 0]))


def _rng(seed, key, desc):
    return np.random.default_rng([seed, zlib.crc32(key.encode()), zlib.crc32(repr(desc).encode())])


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("BGL_THREADS", "1")))
    except ValueError:
        return 1


def _jobs(config: SuiteConfig):
    """(check, desc, seed) triples, in a fixed order."""
    jobs = []
    for c in config.selected():
        for i, seed in enumerate(config.seeds):
            if c.scope == "first-seed" and i:
                continue
            descs = config.descriptors[:1] if c.scope == "global" else config.descriptors
            for d in descs:
                jobs.append((c, d, seed))
    return jobs


def run(config: SuiteConfig | None = None) -> SuiteReport:
    config = config or SuiteConfig()
    t_start = time.perf_counter()
    cache, lock = {}, threading.Lock()
    p0s = {}
    for d in config.descriptors:
        for s in config.seeds:
            p0s[d, s] = _p0(config, d, s)

    def execute(job):
        c, d, seed = job
        n = config.n_samples(c)
        key = (c.key, d, seed, n)
        with lock:
            hit = cache.get(key)
        t0 = time.perf_counter()
        if hit is None:
            ctx = S.Context(d, p0s[d, seed], _rng(seed, c.key, d), n)
            try:
                hit = c.fn(ctx)
            except Exception as e:  # a crash is a failure of the check, reported as such
                hit = f"{type(e).__name__}: {e}"
            with lock:
                cache.setdefault(key, hit)
        return job, hit, time.perf_counter() - t0

    jobs = _jobs(config)
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        done = list(pool.map(execute, jobs))

    agg = {}
    for (c, d, seed), out, dt in done:
        a = agg.setdefault(c.id, {"residual": 0.0, "samples": 0, "skipped": 0, "time": 0.0, "errors": []})
        a["time"] += dt
        if isinstance(out, str):
            a["errors"].append(f"{d!r} seed {seed}: {out}")
            a["residual"] = np.inf
            continue
        if c.components:
            r = max(float(out.detail.get(k, np.inf)) for k in c.components)
        else:
            r = float(out.residual)
        a["residual"] = max(a["residual"], r if np.isfinite(r) else np.inf)
        a["samples"] += out.samples
        a["skipped"] += out.skipped

    results = []
    for c in config.selected():
        a = agg[c.id]
        tol = config.tolerance(c)
        total = a["samples"] + a["skipped"]
        too_many_skips = total > 0 and a["skipped"] > MAX_SKIP_FRACTION * total
        ok = not a["errors"] and a["residual"] <= tol and not too_many_skips
        err = "; ".join(a["errors"][:3])
        if too_many_skips and not err:
            err = f"{a['skipped']} of {total} samples left the chart domain"
        results.append(CheckResult(c.id, c.suite, "; ".join(c.anchors), a["residual"], tol, a["samples"],
                                   a["skipped"], ok, c.expect_fail, a["time"], err))
    return SuiteReport(results, config.to_dict(), time.perf_counter() - t_start)


def negative_controls_ok(report: SuiteReport) -> bool:
    """Every expected-FAIL check in the report did fail."""
    neg = [r for r in report.results if r.expected_fail]
    return bool(neg) and all(not r.passed for r in neg)


# ================================================================ fixtures

def encode_element(x: AlgebraElement) -> dict:
    out = {"blocks": [[[float(v.real), float(v.imag)] for v in b.ravel()] for b in x.blocks]}
    if isinstance(x, ProjectionElement):
        out["rank_vector"] = list(x.rank_vector)
    return out


def decode_element(desc: AlgebraDescriptor, d: dict) -> AlgebraElement:
    blocks = []
    for n, flat in zip(desc.block_dims, d["blocks"]):
        arr = np.array([complex(re, im) for re, im in flat], dtype=complex).reshape(n, n)
        blocks.append(arr)
    if "rank_vector" in d:
        return ProjectionElement(desc, blocks, tuple(d["rank_vector"]), check=False)
    return AlgebraElement(desc, blocks)


def _gen_t_family(seed):
    d = AlgebraDescriptor.parse("M2")
    elements, projections = {}, {}
    for t in (0.1, 1.0, 10.0):
        p, y, expected = t_family(t)
        projections["p"] = p
        elements[f"y_p[t={t}]"] = y
        elements[f"y_perp[t={t}]"] = perp_transition(p, y)
        elements[f"y_perp_expected[t={t}]"] = expected
        projections[f"q[t={t}]"] = chart_phi_inv(p, y)
    return d, elements, projections, {}


def _gen_chart(seed, algebra="M2"):
    d = AlgebraDescriptor.parse(algebra)
    rng = np.random.default_rng([seed, zlib.crc32(b"chart")])
    rv = tuple(max(1, n // 2) for n in d.block_dims)
    p0 = random_projection(d, rv, rng)
    p, pt = random_projection(d, rv, rng), random_projection(d, rv, rng)
    eta = random_bundle_point_in_chart(p, p0, rng, 0.5)
    xi = random_bundle_point_in_chart(pt, p0, rng, 0.5)
    x = eta @ random_group_element(p0, rng) @ partial_inverse(xi)
    tr = chart_psi(p, pt, x)
    y, z = bundle_chart(p, eta)
    elements = {"eta": eta, "x": x, "y_p": tr.y, "z_pp~": tr.z, "y~_p~": tr.yt, "y_p(eta)": y}
    return d, elements, {"p0": p0, "p": p, "p~": pt}, {"eta_pp0": eta, "z0": z}


def _gen_partial_isometry(seed, algebra="M2"):
    d = AlgebraDescriptor.parse(algebra)
    rng = np.random.default_rng([seed, zlib.crc32(b"partial-isometry")])
    rv = tuple(max(1, n // 2) for n in d.block_dims)
    src, tgt = random_projection(d, rv, rng), random_projection(d, rv, rng)
    u = random_partial_isometry(d, rng, src=src, tgt=tgt)
    z0 = random_partial_isometry(d, rng, src=src, tgt=tgt)
    return d, {"u": u}, {"source": src, "target": tgt}, {"z0": z0}


GENERATORS = {
    "t-family": _gen_t_family,
    "chart": _gen_chart,
    "partial-isometry": _gen_partial_isometry,
}


def fixture(gen_name: str, seed: int = 0) -> str:
    """Serialized fixture (JSON text, byte-identical for a given generator and seed)."""
    try:
        gen = GENERATORS[gen_name]
    except KeyError:
        raise UnknownGenerator(gen_name) from None
    d, elements, projections, frames = gen(seed)
    doc = {
        "schema": SCHEMA_VERSION,
        "generator": gen_name,
        "seed": seed,
        "descriptor": {"name": repr(d), "block_dims": list(d.block_dims)},
        "elements": {k: encode_element(v) for k, v in elements.items()},
        "projections": {k: encode_element(v) for k, v in projections.items()},
        "frames": {k: encode_element(v) for k, v in frames.items()},
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def load_fixture(text: str) -> dict:
    doc = json.loads(text)
    if doc.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported fixture schema {doc.get('schema')!r}")
    d = AlgebraDescriptor(doc["descriptor"]["block_dims"])
    return {
        "descriptor": d,
        "generator": doc["generator"],
        "seed": doc["seed"],
        **{sec: {k: decode_element(d, v) for k, v in doc[sec].items()}
           for sec in ("elements", "projections", "frames")},
    }


# ================================================================ CLI

def _parser():
    ap = argparse.ArgumentParser(prog="wgroupoid", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run verification suites")
    r.add_argument("--config", help="JSON config file")
    r.add_argument("--seed", type=int, action="append", help="seed (repeatable); overrides the config")
    r.add_argument("--suite", help="comma-separated suites; overrides the config")
    r.add_argument("--tol-scale", type=float, help="multiply every tolerance")
    r.add_argument("--json", dest="json_out", help="write the report as JSON")
    f = sub.add_parser("fixture", help="emit a fixture")
    f.add_argument("generator", choices=sorted(GENERATORS))
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--json", dest="json_out", help="output path (default stdout)")
    e = sub.add_parser("explain", help="describe a check")
    e.add_argument("check_id")
    ls = sub.add_parser("list", help="list checks")
    ls.add_argument("--suite", help="comma-separated suites")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "run":
            cfg = SuiteConfig.load(args.config).to_dict() if args.config else {}
            if args.seed:
                cfg["seeds"] = args.seed
            if args.suite is not None:
                cfg["suites"] = args.suite
            if args.tol_scale is not None:
                cfg["tol_scale"] = args.tol_scale
            config = SuiteConfig.from_dict(cfg)
            report = run(config)
            print(report.text())
            if args.json_out:
                with open(args.json_out, "w") as fh:
                    json.dump(report.to_dict(), fh, sort_keys=True, indent=1, default=float)
            if "negative" in config.suites:
                others = [r for r in report.results if not r.expected_fail]
                ok = negative_controls_ok(report) and all(r.passed for r in others)
                print("negative controls:", "all failed as expected" if negative_controls_ok(report)
                      else "SOME PASSED")
                return 0 if ok else 1
            return 0 if report.passed else 1
        if args.verb == "fixture":
            text = fixture(args.generator, args.seed)
            if args.json_out:
                with open(args.json_out, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return 0
        if args.verb == "explain":
            print(explain(args.check_id))
            return 0
        if args.verb == "list":
            suites = args.suite.split(",") if args.suite else None
            for cid in list_checks(suites):
                print(cid)
            return 0
    except (ConfigError, UnknownCheck, UnknownGenerator) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
