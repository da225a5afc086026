"""Experiment configuration: the line-oriented config file format and its
validated in-memory form.

Files hold ``key = value`` pairs, one per line.  Blank lines and lines
starting with ``#`` are ignored.  List values are comma-separated.  Each
``[solver]`` header opens a new solver block whose keys configure one
:class:`~risnull.solvers.SolverSpec`.  Unknown keys are rejected with the
offending line number.

Defaults for omitted keys:

===============  =========================
key              default
===============  =========================
snr_db_grid      20
sigma_p_grid     0.01
trials           200
base_seed        0
output_path      results.csv
workers          1
solver lambda    0.1 (ridge, lasso_ista), otherwise 0
solver step      auto
solver tol       1e-10
solver max_iter  100000
solver rank_tol  max(m, n) * machine eps
===============  =========================
"""

from dataclasses import dataclass, field

from .solvers import SolverSpec

EXPERIMENTS = ("snr_sweep", "perturb_sweep", "correction", "drift")


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    experiment: str
    m: int
    n: int
    solvers: list[SolverSpec]
    snr_db_grid: list[float] = field(default_factory=lambda: [20.0])
    sigma_p_grid: list[float] = field(default_factory=lambda: [0.01])
    trials: int = 200
    base_seed: int = 0
    output_path: str = "results.csv"
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}"
            )
        if self.m < 1 or self.n < 1:
            raise ConfigError(f"m and n must be positive, got m={self.m}, n={self.n}")
        if not self.solvers:
            raise ConfigError("at least one [solver] block is required")
        if not self.snr_db_grid:
            raise ConfigError("snr_db_grid must be non-empty")
        if not self.sigma_p_grid:
            raise ConfigError("sigma_p_grid must be non-empty")
        if any(s < 0 for s in self.sigma_p_grid):
            raise ConfigError("sigma_p_grid entries must be nonnegative")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.experiment == "correction":
            bad = [s.method for s in self.solvers if s.method not in ("pinv", "ridge")]
            if bad:
                raise ConfigError(
                    f"correction experiments support only pinv and ridge solvers, got {bad}"
                )
        if self.experiment == "drift":
            bad = [s.method for s in self.solvers if s.method not in ("lss", "pinv", "ridge")]
            if bad:
                raise ConfigError(
                    f"drift experiments need a closed-form drift formula "
                    f"(lss, pinv or ridge), got {bad}"
                )


_TOP_KEYS = {
    "experiment", "m", "n", "snr_db_grid", "sigma_p_grid",
    "trials", "base_seed", "output_path", "workers",
}
_SOLVER_KEYS = {"method", "lambda", "step", "tol", "max_iter", "rank_tol"}
_DEFAULT_LAMBDA = {"ridge": 0.1, "lasso_ista": 0.1}


def _parse_scalar(text, kind, key, lineno):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(
            f"line {lineno}: value {text!r} for key '{key}' is not a valid "
            f"{kind.__name__}"
        ) from None


def _parse_list(text, kind, key, lineno):
    items = [t.strip() for t in text.split(",") if t.strip()]
    return [_parse_scalar(t, kind, key, lineno) for t in items]


def _build_solver(block: dict, lineno: int) -> SolverSpec:
    if "method" not in block:
        raise ConfigError(f"line {lineno}: [solver] block is missing 'method'")
    method = block["method"]
    lam = block.get("lambda", _DEFAULT_LAMBDA.get(method, 0.0))
    kwargs = {}
    if "step" in block:
        kwargs["step"] = block["step"]
    if "tol" in block:
        kwargs["tol"] = block["tol"]
    if "max_iter" in block:
        kwargs["max_iter"] = block["max_iter"]
    if "rank_tol" in block:
        kwargs["rank_tol"] = block["rank_tol"]
    try:
        return SolverSpec(method, lam=lam, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: invalid solver: {exc}") from None


def loads_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse config text; see the module docstring for the grammar."""
    top: dict = {}
    solver_blocks: list[tuple[int, dict]] = []
    current: dict | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[solver]":
            current = {}
            solver_blocks.append((lineno, current))
            continue
        if line.startswith("["):
            raise ConfigError(f"line {lineno}: unknown section {line!r}")
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()

        if current is None:
            if key not in _TOP_KEYS:
                raise ConfigError(f"line {lineno}: unknown key '{key}'")
            if key == "experiment":
                top[key] = value
            elif key == "output_path":
                top[key] = value
            elif key in ("m", "n", "trials", "base_seed", "workers"):
                top[key] = _parse_scalar(value, int, key, lineno)
            elif key == "snr_db_grid":
                top[key] = _parse_list(value, float, key, lineno)
            elif key == "sigma_p_grid":
                top[key] = _parse_list(value, float, key, lineno)
        else:
            if key not in _SOLVER_KEYS:
                raise ConfigError(f"line {lineno}: unknown key '{key}' in [solver] block")
            if key == "method":
                current[key] = value
            elif key == "step":
                current[key] = value if value == "auto" else _parse_scalar(
                    value, float, key, lineno)
            elif key == "max_iter":
                current[key] = _parse_scalar(value, int, key, lineno)
            else:
                current[key] = _parse_scalar(value, float, key, lineno)

    for req in ("experiment", "m", "n"):
        if req not in top:
            raise ConfigError(f"{source}: required key '{req}' is missing")
    if not solver_blocks:
        raise ConfigError(f"{source}: at least one [solver] block is required")

    solvers = [_build_solver(block, lineno) for lineno, block in solver_blocks]
    return ExperimentConfig(solvers=solvers, **top)


def load_config(path) -> ExperimentConfig:
    """Read and validate an experiment config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads_config(text, source=str(path))
