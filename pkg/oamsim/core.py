#!/usr/bin/env python3
"""
OAMSIM Core Module
Run configuration, plugin management and the orchestrating core
"""

import importlib
import json
import logging
import os
import pkgutil
import threading
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Type, Union

import numpy as np
import yaml
from dotenv import load_dotenv

from .exceptions import (ConfigIssue, ConfigValidationError, ExactnessError, HorizonError,
                         NoInvariantStateError, OamsimError, ParameterError,
                         TruncationGuardError)
from .fock_ops import DensityMatrix
from .measures import MAX_HORIZON
from .params import DimensionlessParams, params_from_dict
from .utils import (ensure_directory, save_json_file, setup_logging, summary_document,
                    write_csv)

logger = logging.getLogger(__name__)

THREADS_ENV = "OAMSIM_THREADS"
BASELINE_CONFIG = Path(__file__).parent / "config" / "baseline.json"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
VERIFY_SCALES = ("quick", "full")
PHYSICAL_KEYS = ("epsilon", "epsilon0", "lambda", "tau", "beta")

DEFAULT_PLUGINS = [
    "resonances_plugin",
    "simulation_plugin",
    "channel_plugin",
    "outcomes_plugin",
    "wasserstein_plugin",
    "verification_plugin",
]

# errors that point at the inputs rather than at the run
INPUT_ERRORS = (ConfigValidationError, ParameterError, ExactnessError, HorizonError,
                NoInvariantStateError, TruncationGuardError)


def _default_params() -> Dict[str, Any]:
    return {"dimensionless": {"xi": "1/2", "eta": "1/3", "theta": 0.6931471805599453,
                              "phi": 0.0, "exact": True}}


@dataclass
class RunConfig:
    """Simulation run configuration"""
    params: Dict[str, Any] = field(default_factory=_default_params)
    truncation: int = 64
    initial_state: Any = field(default_factory=lambda: {"thermal": None})
    horizon: int = 5000
    n_trajectories: int = 200
    seed: Optional[int] = None
    checkpoint_every: int = 500
    output_directory: str = "oamsim_output"

    # Truncation control
    leakage_budget: float = 1e-9
    guard: int = 4

    # Resonance search
    n_max: int = 100

    # Channel iteration
    channel_tol: float = 1e-6
    channel_t_max: int = 100_000

    # Outcome laws
    outcome_horizon: int = 4
    shift_grid: List[int] = field(default_factory=lambda: [0, 10, 100, 1000])

    # Processing options
    max_workers: int = 1
    log_level: str = "INFO"
    log_file: Optional[str] = None
    verify_scale: str = "full"
    enabled_plugins: List[str] = None

    def __post_init__(self):
        if self.enabled_plugins is None:
            self.enabled_plugins = list(DEFAULT_PLUGINS)

    def to_dict(self) -> Dict[str, Any]:
        """Canonical form, round-trips through config_from_dict"""
        return asdict(self)

    def resolved(self) -> Dict[str, Any]:
        """Form embedded in output summaries; the thread count never changes results"""
        data = self.to_dict()
        data.pop("max_workers")
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        return config_from_dict(data)

    def resolved_params(self) -> DimensionlessParams:
        return params_from_dict(self.params)

    def build_initial_state(self, params: Optional[DimensionlessParams] = None,
                            d: Optional[int] = None) -> DensityMatrix:
        params = params if params is not None else self.resolved_params()
        return build_initial_state(self.initial_state, params,
                                   self.truncation if d is None else d)


# initial state specifications

def _parse_amplitude(value: Any) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParameterError(f"amplitude {value!r} is neither a number nor a [re, im] pair")
    return complex(float(value))


def parse_state_spec(spec: Any) -> Dict[str, Any]:
    """
    Canonical single-key form of an initial state. Accepted inputs:
    "fock:k", "thermal", "thermal:theta", {"fock": k}, {"thermal": theta or null},
    {"mixture": [[k, w], ...]} and {"pure": [a0, a1, ...]} where each
    amplitude is a number or a [re, im] pair.
    """
    if isinstance(spec, str):
        kind, _, arg = spec.partition(":")
        kind = kind.strip().lower()
        if kind == "fock":
            try:
                return parse_state_spec({"fock": int(arg)})
            except ValueError:
                raise ParameterError(f"bad Fock level in {spec!r}")
        if kind == "thermal":
            try:
                return parse_state_spec({"thermal": float(arg) if arg else None})
            except ValueError:
                raise ParameterError(f"bad temperature in {spec!r}")
        raise ParameterError(f"unknown initial state {spec!r}")

    if not isinstance(spec, dict) or len(spec) != 1:
        raise ParameterError("initial state must be a string or a single-key object")
    kind, value = next(iter(spec.items()))

    if kind == "fock":
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise ParameterError(f"Fock level must be a non-negative integer, got {value!r}")
        return {"fock": value}
    if kind == "thermal":
        if value is not None and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ParameterError(f"thermal theta must be a number or null, got {value!r}")
        return {"thermal": None if value is None else float(value)}
    if kind == "mixture":
        if not isinstance(value, list) or not value:
            raise ParameterError("mixture needs a non-empty list of [level, weight] pairs")
        pairs = []
        for item in value:
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise ParameterError(f"mixture entry {item!r} is not a [level, weight] pair")
            k, w = item
            if isinstance(k, bool) or not isinstance(k, int) or k < 0:
                raise ParameterError(f"mixture level {k!r} is not a non-negative integer")
            if isinstance(w, bool) or not isinstance(w, (int, float)) or w < 0:
                raise ParameterError(f"mixture weight {w!r} is not a non-negative number")
            pairs.append([k, float(w)])
        if sum(w for _, w in pairs) <= 0:
            raise ParameterError("mixture weights sum to zero")
        return {"mixture": pairs}
    if kind == "pure":
        if not isinstance(value, list) or not value:
            raise ParameterError("pure state needs a non-empty amplitude list")
        amps = [_parse_amplitude(a) for a in value]
        if not any(abs(a) > 0 for a in amps):
            raise ParameterError("pure state amplitudes are all zero")
        return {"pure": [[a.real, a.imag] for a in amps]}
    raise ParameterError(f"unknown initial state kind {kind!r}")


def build_initial_state(spec: Any, params: DimensionlessParams, d: int) -> DensityMatrix:
    spec = parse_state_spec(spec)
    kind, value = next(iter(spec.items()))
    if kind == "fock":
        return DensityMatrix.fock(value, d)
    if kind == "thermal":
        return DensityMatrix.thermal(params.theta if value is None else value, d)
    if kind == "mixture":
        top = max(k for k, _ in value)
        if top > d:
            raise ParameterError(f"mixture level {top} outside 0..{d}")
        weights = np.zeros(top + 1)
        for k, w in value:
            weights[k] += w
        return DensityMatrix.from_diagonal(weights, d)
    return DensityMatrix.pure([complex(re, im) for re, im in value], d)


# validation

class _Checker:
    """Collects configuration issues instead of stopping at the first one"""

    def __init__(self, data: Dict[str, Any]):
        self.data = data
        self.issues: List[ConfigIssue] = []

    def add(self, path: str, message: str) -> None:
        self.issues.append(ConfigIssue(path, message))

    def integer(self, key: str, minimum: Optional[int] = None,
                maximum: Optional[int] = None, nullable: bool = False) -> None:
        if key not in self.data:
            return
        value = self.data[key]
        if value is None and nullable:
            return
        if isinstance(value, bool) or not isinstance(value, int):
            self.add(f"/{key}", f"expected an integer, got {value!r}")
        elif minimum is not None and value < minimum:
            self.add(f"/{key}", f"must be >= {minimum}, got {value}")
        elif maximum is not None and value > maximum:
            self.add(f"/{key}", f"must be <= {maximum}, got {value}")

    def number(self, key: str, low: float, high: float = float("inf")) -> None:
        """Number in the open interval (low, high)"""
        if key not in self.data:
            return
        value = self.data[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.add(f"/{key}", f"expected a number, got {value!r}")
        elif not low < value < high:
            self.add(f"/{key}", f"must lie in ({low}, {high}), got {value}")

    def choice(self, key: str, options: Sequence[str]) -> None:
        if key in self.data and self.data[key] not in options:
            self.add(f"/{key}", f"must be one of {', '.join(options)}, got {self.data[key]!r}")

    def string_list(self, key: str) -> None:
        value = self.data.get(key)
        if key in self.data and value is not None and (
                not isinstance(value, list) or not all(isinstance(v, str) for v in value)):
            self.add(f"/{key}", "expected a list of strings")


def _check_params(block: Any, checker: _Checker) -> Optional[DimensionlessParams]:
    if not isinstance(block, dict):
        checker.add("/params", "expected an object with a 'physical' or 'dimensionless' block")
        return None
    present = [k for k in ("physical", "dimensionless") if k in block]
    if len(present) != 1:
        checker.add("/params", "exactly one of 'physical' or 'dimensionless' must be given")
        return None
    for key in block:
        if key not in ("physical", "dimensionless"):
            checker.add(f"/params/{key}", "unknown key")
    kind = present[0]
    inner = block[kind]
    if not isinstance(inner, dict):
        checker.add(f"/params/{kind}", "expected an object")
        return None

    before = len(checker.issues)
    if kind == "physical":
        for key in PHYSICAL_KEYS:
            value = inner.get(key)
            if key not in inner:
                checker.add(f"/params/physical/{key}", "required")
            elif isinstance(value, bool) or not isinstance(value, (int, float)):
                checker.add(f"/params/physical/{key}", f"expected a number, got {value!r}")
    else:
        for key in ("xi", "eta"):
            if key not in inner:
                checker.add(f"/params/dimensionless/{key}", "required")
        for key in ("theta", "phi"):
            value = inner.get(key, 0.0)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                checker.add(f"/params/dimensionless/{key}", f"expected a number, got {value!r}")
        if "exact" in inner and not isinstance(inner["exact"], bool):
            checker.add("/params/dimensionless/exact", "expected true or false")
        injected = inner.get("injected_resonances", [])
        if not isinstance(injected, list) or not all(
                isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in injected):
            checker.add("/params/dimensionless/injected_resonances",
                        "expected a list of positive integers")
    if len(checker.issues) > before:
        return None

    try:
        return params_from_dict(block)
    except (ParameterError, ValueError, ZeroDivisionError, TypeError) as e:
        checker.add(f"/params/{kind}", str(e))
        return None


def validate_config_dict(data: Any) -> List[ConfigIssue]:
    """Every violation in a configuration mapping; empty when it is valid"""
    if not isinstance(data, dict):
        return [ConfigIssue("", "configuration must be a JSON object")]
    checker = _Checker(data)
    known = {f.name for f in fields(RunConfig)}
    for key in data:
        if key not in known:
            checker.add(f"/{key}", "unknown key")

    params = _check_params(data["params"], checker) if "params" in data else None
    if "params" not in data:
        checker.add("/params", "required")

    checker.integer("truncation", minimum=1)
    checker.integer("horizon", minimum=0)
    checker.integer("n_trajectories", minimum=1)
    checker.integer("seed", minimum=0, nullable=True)
    checker.integer("checkpoint_every", minimum=0)
    checker.integer("guard", minimum=0)
    checker.integer("n_max", minimum=0)
    checker.integer("channel_t_max", minimum=1)
    checker.integer("outcome_horizon", minimum=0, maximum=MAX_HORIZON)
    checker.integer("max_workers", minimum=1)
    checker.number("leakage_budget", 0.0, 1.0)
    checker.number("channel_tol", 0.0)
    checker.choice("log_level", LOG_LEVELS)
    checker.choice("verify_scale", VERIFY_SCALES)
    checker.string_list("enabled_plugins")
    if "output_directory" in data and not isinstance(data["output_directory"], str):
        checker.add("/output_directory", "expected a path string")
    if "log_file" in data and data["log_file"] is not None and not isinstance(data["log_file"], str):
        checker.add("/log_file", "expected a path string or null")
    grid = data.get("shift_grid", [])
    if not isinstance(grid, list) or not all(
            isinstance(t, int) and not isinstance(t, bool) and t >= 0 for t in grid):
        checker.add("/shift_grid", "expected a list of non-negative integers")

    state = None
    if "initial_state" in data:
        try:
            state = parse_state_spec(data["initial_state"])
        except ParameterError as e:
            checker.add("/initial_state", str(e))

    # guard rule: the initial support plus the guard band must fit below d
    if params is not None and not any(i.path in ("/truncation", "/guard", "/leakage_budget",
                                                 "/initial_state") for i in checker.issues):
        defaults = RunConfig()
        d = data.get("truncation", defaults.truncation)
        guard = data.get("guard", defaults.guard)
        budget = data.get("leakage_budget", defaults.leakage_budget)
        try:
            rho0 = build_initial_state(state if state is not None else defaults.initial_state,
                                       params, d)
        except ParameterError as e:
            checker.add("/initial_state", str(e))
        else:
            support = rho0.max_support(atol=budget)
            if support + guard > d:
                checker.add("/truncation",
                            f"guard rule violated: truncation {d} < initial support "
                            f"{support} + guard {guard}")
    return checker.issues


def config_from_dict(data: Any) -> RunConfig:
    issues = validate_config_dict(data)
    if issues:
        raise ConfigValidationError(issues)
    values = dict(data)
    values["initial_state"] = parse_state_spec(values.get("initial_state", {"thermal": None}))
    return RunConfig(**values)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration, reporting every violation at once"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigValidationError([ConfigIssue("", f"invalid JSON: {e}")])
    return config_from_dict(data)


def load_config_file(config_path: Union[str, Path]) -> RunConfig:
    """Load a .json or .yaml/.yml configuration file"""
    path = Path(config_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigValidationError([ConfigIssue("", f"cannot read {path}: {e}")])
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigValidationError([ConfigIssue("", f"invalid YAML: {e}")])
        return config_from_dict(data)
    return parse_config(text)


def thread_count(default: int = 1, env_file: Optional[str] = None) -> int:
    """Worker threads from OAMSIM_THREADS (read through a .env file when present)"""
    load_dotenv(env_file)
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigValidationError([ConfigIssue(f"${THREADS_ENV}", f"not an integer: {raw!r}")])
    if value < 1:
        raise ConfigValidationError([ConfigIssue(f"${THREADS_ENV}", "must be >= 1")])
    return value


def failure_result(plugin: str, error: Exception) -> Dict[str, Any]:
    """Result dict a plugin returns when its run raised"""
    if isinstance(error, OamsimError) and hasattr(error, "to_record"):
        record = error.to_record()
    else:
        record = {"error": type(error).__name__}
    record.setdefault("message", str(error))
    return {
        "plugin": plugin,
        "status": "failed",
        "error": str(error),
        "error_record": record,
        "exit_code": 1 if isinstance(error, INPUT_ERRORS) else 2,
    }


class PluginInterface(ABC):
    """Base interface for all OAMSIM plugins"""

    @property
    @abstractmethod
    def name(self) -> str:
        """Plugin name"""
        pass

    @property
    @abstractmethod
    def version(self) -> str:
        """Plugin version"""
        pass

    @property
    @abstractmethod
    def description(self) -> str:
        """Plugin description"""
        pass

    @abstractmethod
    async def initialize(self, core_app: 'MaserCore') -> bool:
        """Initialize the plugin"""
        pass

    @abstractmethod
    async def cleanup(self) -> None:
        """Cleanup plugin resources"""
        pass


class AnalysisPlugin(PluginInterface):
    """Base class for the computation plugins behind each subcommand"""

    @abstractmethod
    async def analyze(self, data: Any) -> Dict[str, Any]:
        """Run the computation and write its outputs"""
        pass


class PluginManager:
    """Discovers and loads the plugins of the oamsim.plugins package"""

    def __init__(self, package: str = "oamsim.plugins"):
        self.package = package
        self.loaded_plugins: Dict[str, PluginInterface] = {}
        self.logger = logging.getLogger(f"{__name__}.PluginManager")

    def discover_plugins(self) -> List[str]:
        """Plugin modules are the package's *_plugin modules"""
        module = importlib.import_module(self.package)
        plugins = sorted(info.name for info in pkgutil.iter_modules(module.__path__)
                         if info.name.endswith("_plugin"))
        self.logger.debug(f"Discovered {len(plugins)} plugins: {plugins}")
        return plugins

    def _get_plugin_class_name(self, plugin_name: str) -> str:
        """Convert plugin module name to expected class name"""
        parts = plugin_name.replace('_plugin', '').split('_')
        return ''.join(word.capitalize() for word in parts) + 'Plugin'

    async def load_plugin(self, plugin_name: str, core_app: 'MaserCore') -> bool:
        """Load a specific plugin"""
        try:
            module = importlib.import_module(f"{self.package}.{plugin_name}")
            plugin_class_name = self._get_plugin_class_name(plugin_name)
            if not hasattr(module, plugin_class_name):
                self.logger.error(
                    f"Plugin {plugin_name} does not have class {plugin_class_name}")
                return False

            plugin_instance = getattr(module, plugin_class_name)()
            if await plugin_instance.initialize(core_app):
                self.loaded_plugins[plugin_name] = plugin_instance
                self.logger.debug(f"Loaded plugin: {plugin_name}")
                return True
            self.logger.error(f"Failed to initialize plugin: {plugin_name}")
            return False

        except Exception as e:
            self.logger.error(f"Error loading plugin {plugin_name}: {e}")
            return False

    async def load_all_plugins(self, core_app: 'MaserCore', enabled_only: bool = True) -> None:
        for plugin_name in self.discover_plugins():
            if enabled_only and plugin_name not in core_app.config.enabled_plugins:
                continue
            await self.load_plugin(plugin_name, core_app)

    def get_plugins_by_type(self, plugin_type: Type[PluginInterface]) -> List[PluginInterface]:
        return [plugin for plugin in self.loaded_plugins.values()
                if isinstance(plugin, plugin_type)]

    async def cleanup_all_plugins(self) -> None:
        for plugin in self.loaded_plugins.values():
            try:
                await plugin.cleanup()
            except Exception as e:
                self.logger.error(f"Error cleaning up plugin {plugin.name}: {e}")
        self.loaded_plugins.clear()


class MaserCore:
    """Core OAMSIM application: holds the run configuration and drives the plugins"""

    def __init__(self, config: Optional[RunConfig] = None):
        self.config = config or RunConfig()
        self.plugin_manager = PluginManager()
        self.logger = self._setup_logging()
        self.running = False
        self.analysis_results: Dict[str, Any] = {}
        self._write_lock = threading.Lock()
        self._params: Optional[DimensionlessParams] = None

    def _setup_logging(self) -> logging.Logger:
        setup_logging(self.config.log_level, self.config.log_file)
        return logging.getLogger(__name__)

    @property
    def output_directory(self) -> Path:
        return Path(self.config.output_directory)

    @property
    def params(self) -> DimensionlessParams:
        if self._params is None:
            self._params = self.config.resolved_params()
        return self._params

    def resolve_seed(self) -> int:
        """The configured seed, or fresh OS entropy recorded into the config"""
        if self.config.seed is None:
            self.config.seed = int(np.random.SeedSequence().entropy % (2 ** 63))
            self.logger.warning(f"no seed configured, drew {self.config.seed}")
        return self.config.seed

    def initial_state(self, d: Optional[int] = None) -> DensityMatrix:
        return self.config.build_initial_state(self.params, d)

    async def initialize(self) -> bool:
        """Initialize the core application"""
        try:
            self.logger.info("Initializing OAMSIM core")
            if not ensure_directory(self.output_directory):
                return False
            await self.plugin_manager.load_all_plugins(self)
            self.running = True
            return True
        except Exception as e:
            self.logger.error(f"Failed to initialize OAMSIM core: {e}")
            return False

    async def run_plugin(self, plugin_name: str, data: Any = None) -> Dict[str, Any]:
        """Run one loaded analysis plugin and record its result"""
        plugin = self.plugin_manager.loaded_plugins.get(plugin_name)
        if plugin is None or not isinstance(plugin, AnalysisPlugin):
            raise KeyError(f"plugin {plugin_name} is not loaded")
        result = await plugin.analyze(data or {})
        self.set_analysis_result(plugin_name, result)
        return result

    async def shutdown(self) -> None:
        """Shutdown the application gracefully"""
        await self.plugin_manager.cleanup_all_plugins()
        self.running = False
        self.logger.info("OAMSIM core shutdown complete")

    # Results and outputs
    def set_analysis_result(self, plugin_name: str, result: Any) -> None:
        self.analysis_results[plugin_name] = {
            "result": result,
            "timestamp": datetime.now().isoformat(),
            "plugin": plugin_name,
        }

    def get_analysis_result(self, plugin_name: str) -> Optional[Any]:
        result_data = self.analysis_results.get(plugin_name)
        return result_data["result"] if result_data else None

    def get_analysis_plugins(self) -> List[AnalysisPlugin]:
        return self.plugin_manager.get_plugins_by_type(AnalysisPlugin)

    def write_summary(self, kind: str, payload: Dict[str, Any]) -> Path:
        """<output>/<kind>.json with the format version and the resolved config"""
        path = self.output_directory / f"{kind}.json"
        with self._write_lock:
            if not save_json_file(summary_document(kind, self.config.resolved(), payload), path):
                raise OSError(f"could not write {path}")
        return path

    def write_table(self, name: str, rows: List[Dict[str, Any]],
                    columns: Optional[List[str]] = None) -> Path:
        path = self.output_directory / f"{name}.csv"
        with self._write_lock:
            if not write_csv(rows, path, columns):
                raise OSError(f"could not write {path}")
        return path

    def write_error_record(self, record: Dict[str, Any]) -> Path:
        path = self.output_directory / "error.json"
        with self._write_lock:
            save_json_file(summary_document("error", self.config.resolved(), record), path)
        return path

    # Configuration Management
    def save_config(self, config_path: str = "oamsim_config.json") -> bool:
        """Save current configuration"""
        if save_json_file(self.config.to_dict(), Path(config_path)):
            self.logger.info(f"Configuration saved to {config_path}")
            return True
        self.logger.error(f"Failed to save configuration to {config_path}")
        return False

    @classmethod
    def load_config(cls, config_path: str = "oamsim_config.json") -> 'MaserCore':
        """Load configuration and create core instance; a missing file gives the defaults"""
        if Path(config_path).exists():
            return cls(load_config_file(config_path))
        return cls(RunConfig())
