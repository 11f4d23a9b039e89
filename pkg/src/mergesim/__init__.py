"""Deterministic on-ramp merging simulator for mixed CAV/HV traffic with
intent sharing, a priority-based safety shield, and a multi-agent PPO
trainer."""

from .behavior import IdmParams, MobilParams, idm_accel, mobil_decide, style_params
from .config import RunConfig, load_config
from .dynamics import ControllerGains, HighLevelAction, VehicleKind, VehicleState
from .env import MergingEnv, TrafficLevel, TrafficMode
from .geometry import LaneKind, LaneRef, RoadLayout, build_layout
from .intent import IntentTrajectory, generate_intent, predict_hv
from .mappo import TrainConfig, collect_rollout, evaluate, gae, train, update
from .metrics import average_speed, coil_tms, collision_rate, pet
from .safety import SafetyParams, build_priority_list, correct_intention, run_sem

__version__ = "0.1.0"

__all__ = [
    "ControllerGains",
    "HighLevelAction",
    "IdmParams",
    "IntentTrajectory",
    "LaneKind",
    "LaneRef",
    "MergingEnv",
    "MobilParams",
    "RoadLayout",
    "RunConfig",
    "SafetyParams",
    "TrafficLevel",
    "TrafficMode",
    "TrainConfig",
    "VehicleKind",
    "VehicleState",
    "average_speed",
    "build_layout",
    "build_priority_list",
    "coil_tms",
    "collect_rollout",
    "collision_rate",
    "correct_intention",
    "evaluate",
    "gae",
    "generate_intent",
    "idm_accel",
    "load_config",
    "mobil_decide",
    "pet",
    "predict_hv",
    "run_sem",
    "style_params",
    "train",
    "update",
]
