"""Run configuration: one JSON file drives every module.

Defaults reproduce the published experiment constants (reward weights
200/1/4/4, priority weights 1/1/0.5, intent horizon 8, time-headway
threshold 1.2 s, seeds 0/1000/2024).  Unknown keys are rejected with their
field path, every config serializes round-trip losslessly, and the config
hash changes iff a semantic field changes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import get_type_hints

from .behavior import IdmParams, MobilParams, StyleTable
from .dynamics import ControllerGains, DrivingStyle
from .env import MergingEnv, ObservationParams, RewardParams, TrafficLevel, TrafficMode
from .geometry import RoadLayout, build_layout
from .mappo import TrainConfig
from .safety import SafetyParams


class ConfigError(ValueError):
    pass


@dataclass
class LayoutSection:
    through_length: float = 520.0
    merge_start: float = 320.0
    merge_lane_length: float = 100.0
    ramp_approach_length: float = 220.0
    lane_width: float = 4.0
    coil_positions: list[float] = field(
        default_factory=lambda: [325.0, 350.0, 375.0, 400.0, 425.0, 450.0]
    )

    def build(self, path: str) -> RoadLayout:
        try:
            return build_layout(
                self.through_length,
                self.merge_start,
                self.merge_lane_length,
                self.ramp_approach_length,
                self.lane_width,
                tuple(self.coil_positions),
            )
        except ValueError as err:
            raise ConfigError(f"{path}: {err}") from err


@dataclass
class DynamicsSection:
    dt: float = 0.1
    substeps_per_decision: int = 10
    kp_speed: float = 0.5
    k_lat: float = 0.5
    k_head: float = 2.0

    def validate(self, path: str) -> None:
        if self.dt <= 0:
            raise ConfigError(f"{path}.dt: must be positive")
        if self.substeps_per_decision < 1:
            raise ConfigError(f"{path}.substeps_per_decision: must be >= 1")

    def gains(self) -> ControllerGains:
        return ControllerGains(kp_speed=self.kp_speed, k_lat=self.k_lat, k_head=self.k_head)


@dataclass
class StyleSection:
    v0: float = 25.0
    T: float = 1.5
    s0: float = 5.0
    a_max: float = 3.0
    b: float = 5.0
    delta: float = 4.0
    politeness: float = 0.0
    gain_threshold: float = 0.2
    b_safe: float = 2.0

    def build(self, path: str) -> tuple[IdmParams, MobilParams]:
        try:
            idm = IdmParams(v0=self.v0, T=self.T, s0=self.s0, a_max=self.a_max, b=self.b,
                            delta=self.delta)
            mobil = MobilParams(politeness=self.politeness, gain_threshold=self.gain_threshold,
                                b_safe=self.b_safe)
        except ValueError as err:
            raise ConfigError(f"{path}: {err}") from err
        return idm, mobil


@dataclass
class HvSection:
    normal: StyleSection = field(default_factory=StyleSection)
    aggressive: StyleSection = field(
        default_factory=lambda: StyleSection(v0=30.0, T=1.0, a_max=4.0, gain_threshold=0.1)
    )
    timid: StyleSection = field(
        default_factory=lambda: StyleSection(v0=20.0, T=2.0, a_max=2.0, b_safe=1.5, gain_threshold=0.4)
    )

    def build(self, path: str) -> StyleTable:
        return {
            DrivingStyle.NORMAL: self.normal.build(f"{path}.normal"),
            DrivingStyle.AGGRESSIVE: self.aggressive.build(f"{path}.aggressive"),
            DrivingStyle.TIMID: self.timid.build(f"{path}.timid"),
        }


@dataclass
class SafetySection:
    alpha_merge: float = 1.0
    alpha_end: float = 1.0
    alpha_headway: float = 0.5
    t_h: float = 1.2
    noise_var: float = 0.001
    headway_clamp: float = 5.0
    inflation: float = 0.5
    conflict_substeps: int = 4
    perception: float = 150.0
    horizon: int = 8  # intent horizon T_n

    def validate(self, path: str) -> None:
        for name in ("alpha_merge", "alpha_end", "alpha_headway"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{path}.{name}: priority weights must be positive")
        if self.t_h <= 0:
            raise ConfigError(f"{path}.t_h: must be positive")
        if self.noise_var < 0:
            raise ConfigError(f"{path}.noise_var: must be non-negative")
        if self.horizon < 1:
            raise ConfigError(f"{path}.horizon: must be >= 1")

    def build(self) -> SafetyParams:
        return SafetyParams(
            alpha_merge=self.alpha_merge,
            alpha_end=self.alpha_end,
            alpha_headway=self.alpha_headway,
            t_h=self.t_h,
            noise_var=self.noise_var,
            headway_clamp=self.headway_clamp,
            inflation=self.inflation,
            conflict_substeps=self.conflict_substeps,
            perception=self.perception,
            horizon=self.horizon,
        )


@dataclass
class RewardSection:
    w_collision: float = 200.0
    w_speed: float = 1.0
    w_headway: float = 4.0
    w_merge: float = 4.0
    t_h: float = 1.2
    v_low: float = 10.0
    v_high: float = 30.0
    headway_clamp: float = 5.0
    merge_sign: float = -1.0  # r_m applied as a penalty; +1 flips for sensitivity runs

    def validate(self, path: str) -> None:
        for name in ("w_collision", "w_speed", "w_headway", "w_merge"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{path}.{name}: weighting coefficients must be positive")
        if self.v_high <= self.v_low:
            raise ConfigError(f"{path}.v_high: must exceed v_low")
        if self.merge_sign not in (-1.0, 1.0):
            raise ConfigError(f"{path}.merge_sign: must be -1 or +1")

    def build(self) -> RewardParams:
        return RewardParams(
            w_collision=self.w_collision,
            w_speed=self.w_speed,
            w_headway=self.w_headway,
            w_merge=self.w_merge,
            t_h=self.t_h,
            v_low=self.v_low,
            v_high=self.v_high,
            headway_clamp=self.headway_clamp,
            merge_sign=self.merge_sign,
        )


@dataclass
class EnvSection:
    mode: str = "easy"
    heterogeneous: bool = False
    episode_horizon: int = 100
    n_obs_vehicles: int = 5

    def validate(self, path: str) -> None:
        if self.mode not in ("easy", "hard"):
            raise ConfigError(f"{path}.mode: must be 'easy' or 'hard'")
        if self.episode_horizon < 1:
            raise ConfigError(f"{path}.episode_horizon: must be >= 1")
        if self.n_obs_vehicles < 1:
            raise ConfigError(f"{path}.n_obs_vehicles: must be >= 1")

    def traffic_mode(self) -> TrafficMode:
        return TrafficMode(TrafficLevel(self.mode), self.heterogeneous)


@dataclass
class TrainSection:
    total_steps: int = 100_000
    seeds: list[int] = field(default_factory=lambda: [0, 1000, 2024])
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    lr: float = 3e-4
    epochs: int = 10
    minibatch: int = 64
    rollout_steps: int = 256
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    hidden: int = 128
    eval_every_episodes: int = 200
    eval_episodes: int = 3

    def build(self, toggles: "TogglesSection", path: str) -> TrainConfig:
        try:
            return TrainConfig(
                total_steps=self.total_steps,
                seeds=tuple(self.seeds),
                gamma=self.gamma,
                lam=self.lam,
                clip_eps=self.clip_eps,
                lr=self.lr,
                epochs=self.epochs,
                minibatch=self.minibatch,
                rollout_steps=self.rollout_steps,
                value_coef=self.value_coef,
                entropy_coef=self.entropy_coef,
                max_grad_norm=self.max_grad_norm,
                hidden=self.hidden,
                eval_every_episodes=self.eval_every_episodes,
                eval_episodes=self.eval_episodes,
                curriculum_from=toggles.curriculum_from,
                store_corrected_action=toggles.store_corrected_action,
            )
        except ValueError as err:
            raise ConfigError(f"{path}: {err}") from err


@dataclass
class TogglesSection:
    sem_enabled: bool = True
    igm_enabled: bool = True
    store_corrected_action: bool = False
    curriculum_from: str | None = None


@dataclass
class RunConfig:
    layout: LayoutSection = field(default_factory=LayoutSection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    hv: HvSection = field(default_factory=HvSection)
    safety: SafetySection = field(default_factory=SafetySection)
    reward: RewardSection = field(default_factory=RewardSection)
    env: EnvSection = field(default_factory=EnvSection)
    train: TrainSection = field(default_factory=TrainSection)
    toggles: TogglesSection = field(default_factory=TogglesSection)
    out_dir: str = "out"

    def validate(self) -> "RunConfig":
        self.layout.build("layout")
        self.dynamics.validate("dynamics")
        self.hv.build("hv")
        self.safety.validate("safety")
        self.reward.validate("reward")
        self.env.validate("env")
        self.train.build(self.toggles, "train")
        return self

    # -- construction of live objects --------------------------------------

    def build_layout(self) -> RoadLayout:
        return self.layout.build("layout")

    def build_env(self, record: bool = False) -> MergingEnv:
        return MergingEnv(
            layout=self.build_layout(),
            mode=self.env.traffic_mode(),
            gains=self.dynamics.gains(),
            safety=self.safety.build(),
            reward=self.reward.build(),
            observation=ObservationParams(
                n_vehicles=self.env.n_obs_vehicles, perception=self.safety.perception
            ),
            horizon=self.env.episode_horizon,
            dt=self.dynamics.dt,
            substeps=self.dynamics.substeps_per_decision,
            sem_enabled=self.toggles.sem_enabled,
            igm_enabled=self.toggles.igm_enabled,
            record=record,
            styles=self.hv.build("hv"),
        )

    def build_train_config(self) -> TrainConfig:
        return self.train.build(self.toggles, "train")


def _from_dict(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'top level'}: expected an object, got {type(data).__name__}")
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = path or "top level"
        raise ConfigError(f"unknown key(s) {unknown} at {where}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        sub = hints.get(f.name)
        if dataclasses.is_dataclass(sub):
            kwargs[f.name] = _from_dict(sub, value, f"{path}.{f.name}" if path else f.name)
        else:
            kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except TypeError as err:
        raise ConfigError(f"{path or 'top level'}: {err}") from err


def config_from_dict(data: dict) -> RunConfig:
    return _from_dict(RunConfig, data, "").validate()


def config_to_dict(config: RunConfig) -> dict:
    return dataclasses.asdict(config)


def load_config(path: str | Path | None) -> RunConfig:
    """Load a JSON config; missing fields take defaults; an empty file (or
    None) yields the full default configuration."""
    if path is None:
        return RunConfig().validate()
    text = Path(path).read_text().strip()
    if not text:
        return RunConfig().validate()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err.msg}, line {err.lineno})") from err
    return config_from_dict(data)


def save_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n")


def config_hash(config: RunConfig) -> str:
    payload = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()
