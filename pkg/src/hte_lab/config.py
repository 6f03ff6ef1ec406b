"""INI run configuration.

    [run]           seed, replications, jobs, output
    [dgp]           name, csv, n, treatment, treatment_column, observational, effect
    [data]          treatment, outcome, covariates     (used by ``fit``)
    [model NAME]    family, base, base.<hp>, tau_base, tau_base.<hp>, m_base, m_base.<hp>, <family options>

Values: integers, floats, ``true``/``false``, ``auto`` (= tune by CV / use the
default), anything else is a string.  Inline comments start with ``;`` or ``#``.
Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .dgp import DgpSpec
from .learners import LearnerSpec, SpecError
from .meta import FAMILY_OPTIONS, ModelConfig

RUN_KEYS = {"seed": 0, "replications": 200, "jobs": 1, "output": "results"}
DGP_KEYS = {"name", "csv", "n", "treatment", "treatment_column", "observational", "effect"}
DATA_KEYS = {"treatment", "outcome", "covariates"}
SPEC_ROLES = ("base", "tau_base", "m_base")
# excluded from the digest: they change where/how fast, not what
VOLATILE = {("run", "jobs"), ("run", "output")}


class ConfigError(ValueError):
    pass


def parse_value(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes"):
        return True
    if low in ("false", "no"):
        return False
    if low == "auto":
        return None
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    return t


def parse_treatment(text: str) -> tuple:
    """``from_data`` | ``randomized:p`` | ``targeted:a,b``."""
    kind, _, args = text.partition(":")
    kind = kind.strip()
    values = tuple(float(a) for a in args.split(",")) if args.strip() else ()
    arity = {"from_data": 0, "randomized": 1, "targeted": 2}
    if kind not in arity or len(values) != arity[kind]:
        raise ValueError(f"bad treatment {text!r}; use from_data, randomized:p or targeted:a,b")
    return (kind, *values)


@dataclass
class RunConfig:
    seed: int
    replications: int
    jobs: int
    output: str
    dgp: DgpSpec | None
    models: list[ModelConfig]
    data: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        canon = {s: {k: v for k, v in kv.items() if (s, k) not in VOLATILE} for s, kv in self.raw.items()}
        canon["run"] = {**canon.get("run", {}), "seed": self.seed, "replications": self.replications}
        blob = json.dumps(canon, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _line_of(text: str, section: str, key: str | None) -> int:
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[(.+)]\s*$", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
        elif current == section and key is not None and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return i
    return 0


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    parser = configparser.ConfigParser(interpolation=None, default_section="\0defaults",
                                       inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None

    def fail(section, key, msg):
        line = _line_of(text, section, key)
        where = f"{path}:{line}" if line else str(path)
        raise ConfigError(f"{where}: [{section}]{' ' + key if key else ''}: {msg}")

    raw = {s: dict(parser[s]) for s in parser.sections()}
    for section, kv in raw.items():
        if section in ("run", "dgp", "data") or section.startswith("model "):
            allowed = {"run": set(RUN_KEYS), "dgp": DGP_KEYS, "data": DATA_KEYS}.get(section)
            if allowed is not None:
                for key in kv:
                    if key not in allowed:
                        fail(section, key, f"unknown key {key!r}; allowed: {sorted(allowed)}")
        else:
            fail(section, None, f"unknown section {section!r}")

    run = {k: raw.get("run", {}).get(k, v) for k, v in RUN_KEYS.items()}
    values = {}
    for key in ("seed", "replications", "jobs"):
        v = parse_value(str(run[key]))
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            fail("run", key, f"expected a non-negative integer, got {run[key]!r}")
        values[key] = v

    dgp = None
    if "dgp" in raw:
        kv = raw["dgp"]
        if "name" not in kv:
            fail("dgp", None, "missing key 'name'")
        args = {k: parse_value(v) for k, v in kv.items() if k not in ("treatment", "csv", "treatment_column")}
        for k in ("csv", "treatment_column"):
            if k in kv:
                args[k] = kv[k].strip()
        try:
            if "treatment" in kv:
                args["treatment"] = parse_treatment(kv["treatment"])
            dgp = DgpSpec(**args)
        except (TypeError, ValueError) as exc:
            fail("dgp", None, str(exc))

    models = []
    for section, kv in raw.items():
        if not section.startswith("model "):
            continue
        name = section[len("model "):].strip()
        if "family" not in kv:
            fail(section, None, "missing key 'family'")
        family = kv["family"].strip()
        if family not in FAMILY_OPTIONS:
            fail(section, "family", f"unknown family {family!r}; expected one of {sorted(FAMILY_OPTIONS)}")
        specs = {role: [kv[role].strip(), {}] for role in SPEC_ROLES if role in kv}
        options = {}
        for key, value in kv.items():
            if key == "family" or key in SPEC_ROLES:
                continue
            role, dot, hp = key.partition(".")
            if dot:
                if role not in specs:
                    fail(section, key, f"set {role!r} before its hyperparameters")
                specs[role][1][hp] = parse_value(value)
            elif key in FAMILY_OPTIONS[family]:
                options[key] = parse_value(value)
            else:
                fail(section, key, f"unknown key {key!r} for family {family}; "
                                   f"allowed: {sorted(FAMILY_OPTIONS[family] | {'family', *SPEC_ROLES})}")
        try:
            built = {role: LearnerSpec(fam, hps) for role, (fam, hps) in specs.items()}
            models.append(ModelConfig(name, family, options=options, **built))
        except (SpecError, ValueError) as exc:
            fail(section, None, str(exc))

    return RunConfig(values["seed"], values["replications"], values["jobs"], str(run["output"]), dgp, models,
                     dict(raw.get("data", {})), raw)
