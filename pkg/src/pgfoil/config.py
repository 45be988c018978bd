"""Flat ``section.key = value`` configuration shared by every subcommand.

Files hold one assignment per line; ``#`` starts a comment.  Values given on
the command line override the file, and unknown keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from pgfoil.cae.base import FlowConditions
from pgfoil.nn import Architecture, LatentSpec
from pgfoil.training.config import DEFAULT_EPS, TrainConfig

CONFIG_NAME = "config.txt"
VERSION_NAME = "VERSION"


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _opt_float(text: str) -> float | None:
    return None if text.strip() in ("", "none") else float(text)


def _show(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, tuple):
        return ",".join(_show(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class Key:
    parse: object
    default: object
    help: str = ""


_T = TrainConfig()

KEYS: dict[str, Key] = {
    "run.seed": Key(int, 0, "seed for every random draw"),
    "run.parallel": Key(int, 1, "concurrent oracle evaluations"),
    "oracle.kind": Key(str, "panel", "panel or xfoil"),
    "oracle.xfoil.path": Key(str, "", "XFoil executable (PGFOIL_XFOIL overrides when empty)"),
    "oracle.xfoil.timeout": Key(float, 30.0, "seconds per XFoil run"),
    "oracle.xfoil.repanel": Key(_bool, False, "ask XFoil to repanel the loaded shape"),
    "oracle.alpha_deg": Key(float, 5.0, "angle of attack in degrees"),
    "oracle.reynolds": Key(float, 3.0e6, "Reynolds number"),
    "oracle.max_iter": Key(int, 100, "solver iteration limit"),
    "oracle.viscous": Key(_bool, True, "viscous XFoil run"),
    "nn.latent_dim": Key(int, 10, "latent vector size"),
    "nn.latent_dist": Key(str, "uniform", "uniform or normal"),
    "nn.g_hidden": Key(_ints, (128, 128, 128), "generator hidden widths"),
    "nn.d_hidden": Key(_ints, (128, 128, 128), "critic hidden widths"),
    "nn.slope": Key(float, 0.2, "leaky-relu slope"),
    "train.lambda_gp": Key(float, _T.lambda_gp, "gradient penalty weight"),
    "train.n_critic": Key(int, _T.n_critic, "critic updates per generator update"),
    "train.batch": Key(int, _T.batch, "batch size"),
    "train.alpha": Key(float, _T.alpha, "Adam step size"),
    "train.alpha_critic": Key(_opt_float, None, "critic step size (none = train.alpha)"),
    "train.beta1": Key(float, _T.beta1, "Adam first-moment decay"),
    "train.beta2": Key(float, _T.beta2, "Adam second-moment decay"),
    "train.eps_array": Key(_floats, DEFAULT_EPS, "decreasing classification thresholds"),
    "train.lambda_phi": Key(float, _T.lambda_phi, "distortion penalty weight"),
    "train.control_labels": Key(_floats, _T.control_labels, "labels used in physics-guided training"),
    "train.pretrain_iters": Key(int, _T.pretrain_iters, "generator updates in pretraining"),
    "train.exact_iters_per_stage": Key(int, _T.exact_iters_per_stage, "exact-algorithm updates per eps"),
    "train.approx_iters_per_stage": Key(int, _T.approx_iters_per_stage, "approximate-algorithm updates per eps"),
    "train.shapes_per_label": Key(int, _T.shapes_per_label, "shapes per control label in a pooling pass"),
    "train.checkpoint_every": Key(int, _T.checkpoint_every, "generator updates between checkpoints"),
    "train.divergence_limit": Key(float, _T.divergence_limit, "abort when a loss magnitude exceeds this"),
    "train.normalize": Key(_bool, _T.normalize, "train on per-coordinate standardized shapes"),
    "train.scale_floor": Key(float, _T.scale_floor, "smallest per-coordinate spread used for standardizing"),
    "eval.n": Key(int, 1000, "shapes per evaluation"),
    "eval.range": Key(str, "0.01:1.58", "label range lo:hi or a comma list"),
    "eval.threshold": Key(float, 0.05, "success threshold on |target - C_L|"),
    "smooth.window": Key(int, 7, "Savitzky-Golay window (odd)"),
    "smooth.order": Key(int, 3, "Savitzky-Golay polynomial order"),
}


class Config:
    def __init__(self, values: dict | None = None):
        self.values = {k: spec.default for k, spec in KEYS.items()}
        for k, v in (values or {}).items():
            self.set(k, v)

    def __getitem__(self, key: str):
        if key not in self.values:
            raise ConfigError(f"unknown config key {key!r}")
        return self.values[key]

    def set(self, key: str, value) -> None:
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, str):
            try:
                value = KEYS[key].parse(value)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        self.values[key] = value

    def update_text(self, text: str, source: str = "<config>") -> None:
        for n, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"{source}:{n}: expected 'key = value', got {line.strip()!r}")
            key, value = (s.strip() for s in body.split("=", 1))
            try:
                self.set(key, value)
            except ConfigError as exc:
                raise ConfigError(f"{source}:{n}: {exc}") from None

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "Config":
        cfg = cls()
        if path is not None:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
            cfg.update_text(text, str(path))
        for k, v in (overrides or {}).items():
            cfg.set(k, v)
        return cfg

    def to_text(self) -> str:
        return "".join(f"{k} = {_show(v)}\n" for k, v in self.values.items())

    def write(self, directory, version: str) -> None:
        """Echo the effective config and tool version into an output directory."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / CONFIG_NAME).write_text(self.to_text())
        (directory / VERSION_NAME).write_text(f"pgfoil {version}\n")

    def architecture(self) -> Architecture:
        return Architecture(LatentSpec(self["nn.latent_dim"], self["nn.latent_dist"]),
                            self["nn.g_hidden"], self["nn.d_hidden"], self["nn.slope"])

    def train_config(self) -> TrainConfig:
        t = {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith("train.")}
        return TrainConfig(seed=self["run.seed"], parallel=self["run.parallel"], arch=self.architecture(), **t)

    def flow_conditions(self) -> FlowConditions:
        return FlowConditions(self["oracle.alpha_deg"], self["oracle.reynolds"], self["oracle.max_iter"],
                              self["oracle.viscous"])

    def oracle(self):
        from pgfoil.cae import PanelOracle, XfoilOracle

        kind = self["oracle.kind"]
        if kind == "panel":
            return PanelOracle()
        if kind == "xfoil":
            return XfoilOracle(self["oracle.xfoil.path"] or None, timeout=self["oracle.xfoil.timeout"],
                               repanel=self["oracle.xfoil.repanel"])
        raise ConfigError(f"oracle.kind must be 'panel' or 'xfoil', got {kind!r}")

    def eval_labels(self):
        return parse_labels(self["eval.range"])


def parse_labels(text: str):
    """``lo:hi`` for a uniform range, otherwise a comma-separated list."""
    text = text.strip()
    try:
        if ":" in text:
            lo, hi = (float(v) for v in text.split(":"))
            return (lo, hi)
        values = _floats(text)
    except ValueError:
        raise ConfigError(f"bad label spec {text!r}; use lo:hi or a,b,c") from None
    if not values:
        raise ConfigError("empty label list")
    return list(values)
