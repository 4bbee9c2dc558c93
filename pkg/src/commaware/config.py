"""JSON run configuration mirroring the scenario type hierarchy."""

import dataclasses
import json
from dataclasses import dataclass, field

from commaware.channel import ChannelParams, Workspace
from commaware.dynamics import MotionWeights, ProblemSpec
from commaware.errors import CommAwareError, ConfigError
from commaware.planner import OnlineSchedule, Scenario
from commaware.solver import SolverParams

MODES = ("simulate-channel", "predict", "plan-offline", "plan-online")


@dataclass(frozen=True)
class RunConfig:
    mode: str = "plan-offline"
    scenario: Scenario = field(default_factory=Scenario)
    schedule: OnlineSchedule = field(default_factory=OnlineSchedule)
    output_dir: str = "results"
    seeds: tuple = (0,)
    n_samples: int = 500
    plots: bool = False


_NESTED = {
    "scenario": Scenario,
    "schedule": OnlineSchedule,
    "problem": ProblemSpec,
    "weights": MotionWeights,
    "channel": ChannelParams,
    "workspace": Workspace,
    "solver": SolverParams,
}


def _check_scalar(value, default, path):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError("expected true/false", path)
    elif isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("expected an integer", path)
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("expected a number", path)
        return float(value)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError("expected a string", path)
    elif isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError("expected a list", path)
        for i, item in enumerate(value):
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigError("expected a number", f"{path}[{i}]")
        return tuple(value)
    return value


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError("expected an object", path)
    defaults = cls()
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}", path)
    kwargs = {}
    for name, value in data.items():
        sub = f"{path}.{name}" if path else name
        if name in _NESTED:
            kwargs[name] = _build(_NESTED[name], value, sub)
        elif name == "local_radius":
            kwargs[name] = None if value is None else _check_scalar(value, 1.0, sub)
        else:
            kwargs[name] = _check_scalar(value, getattr(defaults, name), sub)
    try:
        return dataclasses.replace(defaults, **kwargs)
    except (ValueError, TypeError, CommAwareError) as exc:
        raise ConfigError(str(exc), path or "<root>") from exc


def load_config(data):
    """Build a :class:`RunConfig` from a parsed JSON document."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object", "<root>")
    data = json.loads(json.dumps(data))
    scenario = data.get("scenario", {})
    if not isinstance(scenario, dict):
        raise ConfigError("expected an object", "scenario")
    channel = _build(ChannelParams, scenario.get("channel", {}), "scenario.channel")
    problem = scenario.get("problem", {})
    if isinstance(problem, dict) and "K" not in problem:
        problem["K"] = channel.K
        scenario["problem"] = problem
    data["scenario"] = scenario

    mode = data.get("mode", RunConfig.mode)
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}", "mode")
    seeds = data.get("seeds", [0])
    if (not isinstance(seeds, list) or not seeds
            or any(isinstance(s, bool) or not isinstance(s, int) for s in seeds)):
        raise ConfigError("expected a non-empty list of integers", "seeds")
    data["seeds"] = seeds
    return _build(RunConfig, data, "")


def load_config_file(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc.strerror}", str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc.msg} at line {exc.lineno})", str(path)) from exc
    return load_config(data)


def config_to_dict(cfg):
    """Fully expanded configuration, suitable for the run manifest."""
    return json.loads(json.dumps(dataclasses.asdict(cfg)))
