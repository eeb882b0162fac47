"""Run configuration: strict JSON loading, validation and construction of runtime objects."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from issakit.adamba import AdamBAConfig
from issakit.core import Obstacle, RobotState, SecondOrderRobot, SubsteppedDynamics, SystemLimits, ToyUnicycle
from issakit.ctrigger import TriggerProps, estimate_props, require_trigger_support
from issakit.harness.episode import Env, SafeguardStack
from issakit.harness.policies import Policy, nominal_constant_forward, nominal_goal_seek
from issakit.issa import IssaConfig
from issakit.safety_index import (
    RuleCheck,
    RuleReport,
    SafetyIndex,
    SafetyIndexParams,
    ToyIndex,
    estimate_d_dot_star_min,
    validate_continuous_rule,
    validate_discrete_assumptions,
    validate_discrete_rule,
)

MODELS = ("toy", "second_order")
POLICIES = ("constant_forward", "goal_seek")
INDEX_MODES = ("continuous", "discrete", "continuous-approx")


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def _strict(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    required = {
        f.name for f in dataclasses.fields(cls)
        if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
    }
    missing = sorted(required - set(data))
    if missing:
        raise ConfigError(f"{where}: missing key(s) {missing}")
    return data


@dataclass(frozen=True)
class LimitsSection:
    v_max: float
    a_min: float
    a_max: float
    w_min: float
    w_max: float
    dt: float
    control_box: tuple | None = None


@dataclass(frozen=True)
class ObstacleSection:
    cx: float
    cy: float
    radius: float
    vx: float = 0.0
    vy: float = 0.0


@dataclass(frozen=True)
class IndexSection:
    mode: str
    sigma: float = 0.0
    n: float = 1
    k: float = 1.0
    eta0: float = 0.0
    d_min: float = 1.0
    sigma_star: float = 0.0
    #: toy heading-line index: robot and obstacle radii, status micro-step
    r: float = 0.25
    R: float = 0.25
    micro_dt: float = 1e-5


@dataclass(frozen=True)
class IssaSection:
    enabled: bool = True
    epsilon: float = 1e-3
    beta0: float = 0.2
    n_dirs: int = 10
    cov_scale: float = 1.0
    max_outreach_doublings: int = 60
    edge_backoff: bool = True
    workers: int = 1
    grid_initial_divisions: int = 3
    grid_growth: int = 2
    grid_max_refinements: int = 12


@dataclass(frozen=True)
class TriggerSection:
    enabled: bool = False
    overrides: dict = field(default_factory=dict)


TRIGGER_OVERRIDES = ("w_trigger", "delta_min", "delta_phi_max", "cos_guard", "divisor", "budget")


@dataclass(frozen=True)
class StartSection:
    px: float = 0.0
    py: float = 0.0
    theta: float = 0.0
    v: float = 0.0


@dataclass(frozen=True)
class SimSection:
    steps: int
    dt: float | None = None
    start: StartSection = field(default_factory=StartSection)


@dataclass(frozen=True)
class PolicySection:
    type: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    model: str
    limits: LimitsSection | None
    obstacles: tuple[ObstacleSection, ...]
    index: IndexSection
    sim: SimSection
    policy: PolicySection
    issa: IssaSection = field(default_factory=IssaSection)
    ctrigger: TriggerSection = field(default_factory=TriggerSection)
    seed: int = 0

    # -- parsing ---------------------------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        top = _strict(cls, data, "config")
        try:
            limits = None if top.get("limits") is None else LimitsSection(**_strict(LimitsSection, top["limits"], "limits"))
            obstacles = top["obstacles"]
            if not isinstance(obstacles, list):
                raise ConfigError("obstacles: expected a list")
            obs = tuple(
                ObstacleSection(**_strict(ObstacleSection, o, f"obstacles[{i}]")) for i, o in enumerate(obstacles)
            )
            index = IndexSection(**_strict(IndexSection, top["index"], "index"))
            sim_raw = dict(_strict(SimSection, top["sim"], "sim"))
            if "start" in sim_raw:
                sim_raw["start"] = StartSection(**_strict(StartSection, sim_raw["start"], "sim.start"))
            sim = SimSection(**sim_raw)
            policy = PolicySection(**_strict(PolicySection, top["policy"], "policy"))
            issa = IssaSection(**_strict(IssaSection, top.get("issa", {}), "issa"))
            trig = TriggerSection(**_strict(TriggerSection, top.get("ctrigger", {}), "ctrigger"))
            seed = top.get("seed", 0)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg = cls(top["model"], limits, obs, index, sim, policy, issa, trig, seed)
        cfg._check_types()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        return cls.from_json(text)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["obstacles"] = [dict(o) for o in d["obstacles"]]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def _check_types(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.index.mode not in INDEX_MODES:
            raise ConfigError(f"index.mode must be one of {INDEX_MODES}, got {self.index.mode!r}")
        if self.model == "toy" and self.index.mode == "continuous":
            raise ConfigError("the toy model runs in 'discrete' or 'continuous-approx' mode")
        if self.index.mode == "continuous-approx" and self.model != "toy":
            raise ConfigError("continuous-approx mode is only available for the toy model")
        if self.model == "second_order" and self.limits is None:
            raise ConfigError("second_order model needs a limits section")
        if self.policy.type not in POLICIES:
            raise ConfigError(f"policy.type must be one of {POLICIES}, got {self.policy.type!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        if not isinstance(self.sim.steps, int) or self.sim.steps < 0:
            raise ConfigError("sim.steps must be a non-negative integer")
        if not isinstance(self.ctrigger.overrides, dict):
            raise ConfigError("ctrigger.overrides must be an object")
        bad = sorted(set(self.ctrigger.overrides) - set(TRIGGER_OVERRIDES))
        if bad:
            raise ConfigError(f"ctrigger.overrides: unknown key(s) {bad}")
        if self.sim.dt is not None and self.limits is not None and not math.isclose(self.sim.dt, self.limits.dt):
            raise ConfigError(f"sim.dt = {self.sim.dt} disagrees with limits.dt = {self.limits.dt}")
        if self.dt is None or not self.dt > 0:
            raise ConfigError("a positive time step is required (sim.dt or limits.dt)")
        try:
            self.build_limits()
            self.build_params()
            self.build_issa()
            self.build_obstacles()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # -- overrides ---------------------------------------------------------------------------

    def with_overrides(self, seed: int | None = None, steps: int | None = None, mode: str | None = None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=seed)
        if steps is not None:
            cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, steps=steps))
        if mode is not None:
            cfg = dataclasses.replace(cfg, index=dataclasses.replace(cfg.index, mode=mode))
        cfg._check_types()
        return cfg

    # -- builders ----------------------------------------------------------------------------

    @property
    def dt(self) -> float | None:
        if self.sim.dt is not None:
            return self.sim.dt
        return self.limits.dt if self.limits is not None else None

    def build_limits(self) -> SystemLimits | None:
        if self.limits is None:
            return None
        d = dataclasses.asdict(self.limits)
        d["control_box"] = tuple(tuple(b) for b in (d["control_box"] or ()))
        return SystemLimits(**d)

    def build_params(self) -> SafetyIndexParams:
        ix = self.index
        mode = "discrete" if ix.mode == "discrete" else "continuous"
        return SafetyIndexParams(ix.sigma, ix.n, ix.k, ix.eta0, ix.d_min, ix.sigma_star, mode)

    def build_obstacles(self) -> tuple[Obstacle, ...]:
        return tuple(Obstacle(o.cx, o.cy, o.radius, o.vx, o.vy) for o in self.obstacles)

    def build_issa(self, force: bool = False) -> IssaConfig | None:
        s = self.issa
        ad = AdamBAConfig(
            epsilon=s.epsilon, beta0=s.beta0, n_dirs=s.n_dirs, cov_scale=s.cov_scale,
            max_outreach_doublings=s.max_outreach_doublings, seed=self.seed, workers=s.workers,
            edge_backoff=s.edge_backoff,
        )
        cfg = IssaConfig(ad, s.grid_initial_divisions, s.grid_growth, s.grid_max_refinements)
        return cfg if s.enabled or force else None

    def build_model(self):
        if self.model == "toy":
            return ToyUnicycle()
        return SecondOrderRobot(self.build_limits())

    def build_index(self):
        ix = self.index
        if self.model == "toy":
            scale = ix.micro_dt / self.dt if ix.mode == "continuous-approx" else 1.0
            return ToyIndex(ix.r, ix.R, ix.eta0, eta_scale=scale)
        return SafetyIndex(self.build_params())

    def build_env(self) -> Env:
        model = self.build_model()
        st = self.sim.start
        status_model = None
        if self.index.mode == "continuous-approx":
            status_model = SubsteppedDynamics(model, self.index.micro_dt)
        w_bound = self.build_limits().w_m if self.model == "second_order" else None
        return Env(model, self.build_index(), self.build_obstacles(), self.dt,
                   RobotState(st.px, st.py, st.theta, st.v), status_model, w_bound)

    def build_policy(self, model) -> Policy:
        p = self.policy.params
        allowed = {"constant_forward": {"control"}, "goal_seek": {"goal", "gains"}}[self.policy.type]
        unknown = sorted(set(p) - allowed)
        if unknown:
            raise ConfigError(f"policy.params: unknown key(s) {unknown}")
        if self.policy.type == "constant_forward":
            if "control" not in p:
                raise ConfigError("policy.params: missing 'control'")
            return nominal_constant_forward(p["control"])
        if "goal" not in p:
            raise ConfigError("policy.params: missing 'goal'")
        v_max = self.limits.v_max if self.limits is not None else None
        return nominal_goal_seek(p["goal"], model, p.get("gains", (1.0, 2.0)), v_max)

    def trigger_props(self, estimate_samples: int = 100_000) -> TriggerProps | None:
        if not self.ctrigger.enabled:
            return None
        if self.index.mode != "discrete":
            raise ConfigError("the convergence trigger is only used in discrete mode")
        model = self.build_model()
        require_trigger_support(model)
        ov = {k: v for k, v in self.ctrigger.overrides.items() if k != "budget"}
        limits = self.build_limits()
        need = {"w_trigger", "delta_min", "delta_phi_max"} - set(ov)
        if need:
            est = estimate_props(model, limits, self.build_params(), seed=self.seed, samples=estimate_samples)
            base = dataclasses.asdict(est)
        else:
            base = {"a_min": limits.a_min, "a_max": limits.a_max, "v_max": limits.v_max}
        base.update(ov)
        return TriggerProps(**base)

    def build_stack(self, props: TriggerProps | None) -> SafeguardStack:
        budget = int(self.ctrigger.overrides.get("budget", 10_000))
        return SafeguardStack(self.build_issa(), props, budget)


# -- design checks -----------------------------------------------------------------------------


def design_report(cfg: RunConfig, samples: int = 100_000) -> tuple[RuleReport, dict]:
    """Mode-appropriate design-rule report and auxiliary estimates."""
    extra: dict = {}
    if cfg.model == "toy":
        return RuleReport(()), extra
    limits = cfg.build_limits()
    params = cfg.build_params()
    if params.mode == "continuous":
        return RuleReport((validate_continuous_rule(params, limits),)), extra
    d_range = (0.5 * params.d_min, 3.0 * params.d_min + params.sigma)
    dd = estimate_d_dot_star_min(cfg.build_model(), limits, d_range, samples=samples, seed=cfg.seed)
    extra["d_dot_star_min"] = dd
    rep = validate_discrete_rule(params, limits, dd)
    checks: tuple[RuleCheck, ...] = rep.checks + (validate_discrete_assumptions(limits),)
    return RuleReport(checks), extra


def load_config(path: str | Path) -> RunConfig:
    return RunConfig.load(path)
