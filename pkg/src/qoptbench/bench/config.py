"""Benchmark configuration: TOML in, validated dataclasses out, and back."""
import re
import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

from ..errors import ConfigError, InvalidSchemeError, UnknownProblemError
from ..optimize import Handover, StoppingCriteria, grape, hybrid, krotov
from ..problems import PROBLEM_TABLE

TOP_KEYS = {"problem", "scheme", "restarts", "seed", "jobs", "u_init", "stop", "constrained"}
U_INIT_KEYS = {"mean", "std", "distribution"}
STOP_KEYS = {f.name for f in fields(StoppingCriteria)}
CONSTRAINED_KEYS = {"lo", "hi"}


@dataclass(frozen=True)
class InitialControls:
    mean: float = 0.0
    std: float = 1.0
    distribution: str = "gaussian"

    def __post_init__(self):
        if not self.std > 0:
            raise ConfigError("u_init.std must be positive")
        if self.distribution not in ("gaussian", "uniform"):
            raise ConfigError(f"unknown distribution {self.distribution!r}")


@dataclass(frozen=True)
class BenchConfig:
    problem: object
    scheme: str
    restarts: int = 20
    seed: int = 0
    jobs: int = 1
    u_init: InitialControls = field(default_factory=InitialControls)
    stop: dict = field(default_factory=dict)
    constrained: tuple = None

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if isinstance(self.problem, int) and self.problem not in PROBLEM_TABLE:
            raise UnknownProblemError(f"unknown problem id {self.problem}; valid ids are 1..23")
        unknown = set(self.stop) - STOP_KEYS
        if unknown:
            raise ConfigError(f"unknown stop keys {sorted(unknown)}")
        self.stopping()
        object.__setattr__(self, "scheme", canonical_scheme(self.scheme))
        if self.constrained is not None:
            lo, hi = (float(v) for v in self.constrained)
            if not lo < hi:
                raise ConfigError("constrained bounds need lo < hi")
            object.__setattr__(self, "constrained", (lo, hi))

    def stopping(self):
        try:
            return StoppingCriteria(**self.stop)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid stop settings: {exc}") from None

    def build_scheme(self):
        return parse_scheme(self.scheme)


# -- schemes ------------------------------------------------------------------


def _split_args(body):
    """Split on top-level commas (nested parentheses stay intact)."""
    parts, depth, cur = [], 0, []
    for ch in body:
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
            continue
        depth += ch == "("
        depth -= ch == ")"
        if depth < 0:
            raise InvalidSchemeError("unbalanced parentheses in scheme")
        cur.append(ch)
    if depth:
        raise InvalidSchemeError("unbalanced parentheses in scheme")
    parts.append("".join(cur).strip())
    return parts


_PLAIN = {
    "krotov": krotov,
    "sequential": krotov,
    "grape": lambda: grape("bfgs"),
    "grape-bfgs": lambda: grape("bfgs"),
    "grape-lbfgs": lambda: grape("lbfgs"),
    "concurrent": lambda: grape("bfgs"),
}


def parse_scheme(text):
    """``krotov``, ``grape-bfgs``, ``grape-lbfgs``, ``hybrid(n, s_limit, method)``
    or ``handover(threshold, scheme1, scheme2)``."""
    if not isinstance(text, str):
        raise InvalidSchemeError(f"scheme must be a string, got {text!r}")
    s = text.strip().lower()
    if s in _PLAIN:
        return _PLAIN[s]()
    m = re.fullmatch(r"(hybrid|handover)\s*\((.*)\)", s)
    if not m:
        raise InvalidSchemeError(f"invalid scheme {text!r}")
    kind, args = m.group(1), _split_args(m.group(2))
    try:
        if kind == "hybrid":
            if len(args) not in (2, 3):
                raise InvalidSchemeError("hybrid takes (block_size, s_limit[, method])")
            method = args[2] if len(args) == 3 else "first-order"
            if method not in ("first-order", "bfgs", "lbfgs"):
                raise InvalidSchemeError(f"unknown hybrid method {method!r}")
            block, s_limit = int(args[0]), int(args[1])
            if block < 1 or s_limit < 1:
                raise InvalidSchemeError("block size and s_limit must be positive")
            return hybrid(block, s_limit, method)
        if len(args) != 3:
            raise InvalidSchemeError("handover takes (threshold, scheme1, scheme2)")
        threshold = float(args[0])
        if not 0 <= threshold <= 1:
            raise InvalidSchemeError("handover threshold must lie in [0, 1]")
        first, second = parse_scheme(args[1]), parse_scheme(args[2])
        if isinstance(first, Handover) or isinstance(second, Handover):
            raise InvalidSchemeError("handover stages cannot themselves be handovers")
        return Handover(threshold, first, second)
    except ValueError as exc:
        if isinstance(exc, InvalidSchemeError):
            raise
        raise InvalidSchemeError(f"invalid scheme {text!r}: {exc}") from None


def canonical_scheme(text):
    return parse_scheme(text).name


# -- TOML ---------------------------------------------------------------------


def _line_of(text, key, section=None):
    """Best-effort line number of ``key`` (inside ``[section]`` if given)."""
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        header = re.fullmatch(r"\[\s*([A-Za-z0-9_-]+)\s*\]", stripped)
        if header:
            current = header.group(1)
            if section is None and current == key:
                return n
            continue
        if current == section and re.match(rf"{re.escape(key)}\s*=", stripped):
            return n
    return None


def _decode_line(exc):
    line = getattr(exc, "lineno", None)
    if line is None:
        m = re.search(r"line (\d+)", str(exc))
        line = int(m.group(1)) if m else None
    return line


def _table(data, name, allowed, text):
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table", _line_of(text, name))
    unknown = set(value) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {name}.{key}", _line_of(text, key, name))
    return value


def parse_config(text):
    """Parse a benchmark configuration; unknown keys are errors."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}", _decode_line(exc)) from None
    unknown = set(data) - TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {key!r}", _line_of(text, key))
    for key in ("problem", "scheme"):
        if key not in data:
            raise ConfigError(f"missing required key {key!r}")
    problem = data["problem"]
    if not isinstance(problem, (int, str)) or isinstance(problem, bool):
        raise ConfigError("problem must be an id or a path", _line_of(text, "problem"))
    u_init = _table(data, "u_init", U_INIT_KEYS, text)
    stop = _table(data, "stop", STOP_KEYS, text)
    bounds = _table(data, "constrained", CONSTRAINED_KEYS, text)
    if bounds and set(bounds) != CONSTRAINED_KEYS:
        raise ConfigError("[constrained] needs both lo and hi", _line_of(text, "constrained"))
    try:
        return BenchConfig(
            problem=problem,
            scheme=data["scheme"],
            restarts=int(data.get("restarts", 20)),
            seed=int(data.get("seed", 0)),
            jobs=int(data.get("jobs", 1)),
            u_init=InitialControls(**u_init),
            stop=dict(stop),
            constrained=(bounds["lo"], bounds["hi"]) if bounds else None,
        )
    except UnknownProblemError as exc:
        raise UnknownProblemError(str(exc), _line_of(text, "problem")) from None
    except InvalidSchemeError as exc:
        raise InvalidSchemeError(str(exc), _line_of(text, "scheme")) from None


def config_to_dict(config):
    out = {
        "problem": config.problem,
        "scheme": config.scheme,
        "restarts": config.restarts,
        "seed": config.seed,
        "jobs": config.jobs,
        "u_init": asdict(config.u_init),
    }
    if config.stop:
        out["stop"] = dict(config.stop)
    if config.constrained is not None:
        out["constrained"] = {"lo": config.constrained[0], "hi": config.constrained[1]}
    return out


def emit_config(config):
    """Canonical TOML text; ``parse_config(emit_config(c)) == c``."""
    return tomli_w.dumps(config_to_dict(config))


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
