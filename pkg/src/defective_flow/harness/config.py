"""Experiment configuration: INI files in, CGS quantities out.

User-facing units follow the usual hemodynamics conventions: lengths in mm,
kinematic viscosity in m^2/s, flow rates per unit depth in mm^2/s, time in s.
Everything is converted to CGS (cm, cm^2/s, s) once, here.
"""

import configparser
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from ..exceptions import ConfigError
from ..meshgen import LM, PROFILE, Port, build_channel_mesh, build_manifold_mesh

MM_TO_CM = 0.1
M2S_TO_CM2S = 1.0e4
MM2S_TO_CM2S = 0.01

EXPERIMENT_KINDS = ("m_scaling", "womersley", "verify", "custom")


def load_schema():
    text = resources.files(__package__).joinpath("config_schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class Waveform:
    """Flow-rate waveform ``Q(t)`` (signed outward flux, CGS units).

    kinds: ``constant``; ``ramp`` (linear from 0 to ``amplitude`` over
    ``duration``, then held); ``sinusoid`` (``amplitude * sin(omega t + phase)``).
    """

    kind: str
    amplitude: float
    duration: float = 0.0
    omega: float = 0.0
    phase: float = 0.0

    def __call__(self, t):
        if self.kind == "constant":
            return self.amplitude
        if self.kind == "ramp":
            if self.duration <= 0:
                return self.amplitude
            return self.amplitude * min(1.0, max(0.0, t / self.duration))
        return self.amplitude * math.sin(self.omega * t + self.phase)

    @classmethod
    def parse(cls, text, scale=MM2S_TO_CM2S):
        """``constant:Q``, ``ramp:Q:t_ramp`` or ``sinusoid:Q0:omega[:phase]``
        with ``Q`` in mm^2/s."""
        parts = [p.strip() for p in str(text).split(":")]
        try:
            kind, nums = parts[0].lower(), [float(p) for p in parts[1:]]
        except ValueError:
            raise ConfigError(f"cannot parse waveform {text!r}") from None
        need = {"constant": (1, 1), "ramp": (2, 2), "sinusoid": (2, 3)}
        if kind not in need or not need[kind][0] <= len(nums) <= need[kind][1]:
            raise ConfigError(f"bad waveform {text!r}; expected constant:Q, ramp:Q:t or "
                              "sinusoid:Q0:omega[:phase]")
        amp = nums[0] * scale
        if kind == "ramp":
            return cls(kind, amp, duration=nums[1])
        if kind == "sinusoid":
            return cls(kind, amp, omega=nums[1], phase=nums[2] if len(nums) > 2 else 0.0)
        return cls(kind, amp)


def parse_ports(text):
    """``side:x0-x1:mode`` items separated by commas (x in mm)."""
    ports = []
    for item in filter(None, (s.strip() for s in str(text).split(","))):
        try:
            side, span, *mode = item.split(":")
            x0, x1 = (float(v) for v in span.split("-"))
        except ValueError:
            raise ConfigError(f"cannot parse port {item!r}; expected side:x0-x1[:mode]") from None
        ports.append(Port(side.strip(), (x0, x1), (mode[0].strip() if mode else LM)))
    return tuple(ports)


@dataclass
class ExperimentConfig:
    kind: str = "custom"
    name: str = "run"
    # mesh (mm)
    mesh_type: str = "channel"
    length: float = 10.0
    height: float = 2.0
    nx: int = 56
    ny: int = 14
    inflow_mode: str = LM
    ports: tuple = ()
    # physics (CGS after parsing)
    nu: float = 3.3e-6 * M2S_TO_CM2S
    alpha: float = 0.05
    convection: bool = True
    steady: bool = False
    dt: float = 0.01
    end_time: float = 0.1
    profile_shape: str = "parabolic"
    waveforms: dict = field(default_factory=dict)
    # solver
    precond: str = "aug-as"
    inner: str = "direct"
    inner_schur: str = None
    rel_tol: float = 1e-8
    abs_tol: float = 1e-50
    restart: int = 200
    max_iters: int = 2000
    flexible: bool = False
    fail_fast: bool = False
    # output
    out_dir: str = "out"
    vtk_stride: int = 0
    # experiment specific
    variants: tuple = ("aug-as", "aug-as-i")
    womersley_q0: float = 0.0
    womersley_omega: float = 2.0 * math.pi
    max_mean_spread: float = 0.25
    min_identity_growth: float = 0.30
    max_lm_error: float = 0.05

    @property
    def n_steps(self):
        return max(0, int(round(self.end_time / self.dt)))

    def build_mesh(self, **overrides):
        """Mesh in CGS units (cm)."""
        cfg = replace(self, **overrides) if overrides else self
        if cfg.mesh_type == "channel":
            mesh = build_channel_mesh(cfg.length, cfg.height, cfg.nx, cfg.ny, cfg.inflow_mode)
        elif cfg.mesh_type == "manifold":
            mesh = build_manifold_mesh(cfg.length, cfg.height, cfg.nx, cfg.ny, cfg.ports,
                                       cfg.inflow_mode)
        else:
            raise ConfigError(f"unknown mesh type {cfg.mesh_type!r}")
        return mesh.scaled(MM_TO_CM)

    def validate(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"experiment kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if not self.steady and not self.dt > 0:
            raise ConfigError(f"time step must be positive, got {self.dt}")
        if self.nu <= 0:
            raise ConfigError("viscosity must be positive")
        if self.profile_shape not in ("parabolic", "flat"):
            raise ConfigError(f"unknown profile shape {self.profile_shape!r}")
        names = ["inflow"] + [f"port{k}" for k in range(1, len(self.ports) + 1)]
        if self.kind in ("custom", "verify"):
            missing = [n for n in names if n not in self.waveforms]
            if missing:
                raise ConfigError(f"missing flow-rate waveforms for sections {missing}")
        extra = set(self.waveforms) - set(names)
        if extra:
            raise ConfigError(f"waveforms given for unknown sections {sorted(extra)}")
        return self

    # ------------------------------------------------------------------ parsing
    @classmethod
    def from_file(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_sections({s: dict(parser[s]) for s in parser.sections()}, source=str(path))

    @classmethod
    def from_sections(cls, sections, source="<dict>"):
        schema = load_schema()
        kw = {}
        for sec, values in sections.items():
            if sec == "flow":
                continue
            if sec not in schema:
                raise ConfigError(f"{source}: unknown section [{sec}]")
            for key, raw in values.items():
                if key not in schema[sec]:
                    raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")
                entry = schema[sec][key]
                kw[entry["field"]] = _convert(raw, entry, f"{source}: [{sec}] {key}")
        waveforms = {name: Waveform.parse(text) for name, text in sections.get("flow", {}).items()}
        if "ports" in kw:
            kw["ports"] = parse_ports(kw["ports"])
        if "variants" in kw:
            kw["variants"] = tuple(v.strip() for v in kw["variants"].split(",") if v.strip())
        return cls(waveforms=waveforms, **kw).validate()


def _convert(raw, entry, where):
    kind = entry["type"]
    try:
        if kind == "float":
            value = float(raw) * entry.get("scale", 1.0)
        elif kind == "int":
            value = int(raw)
        elif kind == "bool":
            low = str(raw).strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(raw)
            value = low in ("true", "yes", "1", "on")
        else:
            value = str(raw).strip()
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {kind}") from None
    choices = entry.get("choices")
    if choices and value not in choices:
        raise ConfigError(f"{where}: {value!r} is not one of {choices}")
    return value


__all__ = ["ExperimentConfig", "Waveform", "load_schema", "parse_ports", "LM", "PROFILE"]
