"""Experiment configuration: a flat INI-style key-value file.

One section per subcommand plus a [common] section; every key is validated
before any computation starts. See docs in README for the schema.
"""

import configparser

import numpy as np

from .integrand import Integrand


class ConfigError(Exception):
    """Invalid configuration; message carries section/key or line context."""


def parse_integrand(text):
    """Integrand from a config token.

    Formats: 'constant' or 'constant:V'; 'quadratic:a,b,c' (diagonal) or
    nine comma-separated entries; 'fourier:base,amplitude,l,m'.
    """
    head, _, rest = text.partition(":")
    head = head.strip().lower()
    try:
        if head == "constant":
            return Integrand.constant(float(rest) if rest else 1.0)
        if head == "quadratic":
            vals = [float(t) for t in rest.split(",")]
            if len(vals) == 3:
                return Integrand.quadratic_form(np.diag(vals))
            if len(vals) == 9:
                return Integrand.quadratic_form(np.array(vals).reshape(3, 3))
            raise ConfigError("quadratic integrand needs 3 or 9 entries")
        if head == "fourier":
            base, amp, ell, m = rest.split(",")
            return Integrand.fourier_perturbed(
                float(base), float(amp), (int(ell), int(m)))
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad integrand spec {text!r}: {exc}") from exc
    raise ConfigError(f"unknown integrand family {head!r}")


def parse_family(text):
    """Perturbation family token: 'harmonic:l,m' or 'kernel:cx,cy,cz'."""
    head, _, rest = text.partition(":")
    head = head.strip().lower()
    try:
        if head == "harmonic":
            ell, m = (int(t) for t in rest.split(","))
            return ("harmonic", ell, m)
        if head == "kernel":
            c = np.array([float(t) for t in rest.split(",")])
            if c.shape != (3,):
                raise ConfigError("kernel family needs three components")
            return ("kernel", c)
    except ValueError as exc:
        raise ConfigError(f"bad family spec {text!r}: {exc}") from exc
    raise ConfigError(f"unknown perturbation family {head!r}")


def _floats(text):
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


class ExperimentConfig:
    """Validated experiment settings for one subcommand run."""

    def __init__(self, path):
        cp = configparser.ConfigParser()
        try:
            with open(path) as fh:
                cp.read_file(fh, source=str(path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"parse error: {exc}") from exc
        self._cp = cp
        common = cp["common"] if cp.has_section("common") else {}
        self.seed = self._int(common, "common", "seed", 0)
        self.level = self._int(common, "common", "level", 5)
        self.out = common.get("out", "out")
        self.p = self._float(common, "common", "p", 4.0)
        self.integrand_spec = common.get("integrand", "constant")
        self.integrand = parse_integrand(self.integrand_spec)
        self.tolerance = self._float(common, "common", "tolerance", 1e-8)
        if not 1 < self.p < np.inf:
            raise ConfigError("common.p must lie in (1, inf)")
        if not 2 <= self.level <= 8:
            raise ConfigError("common.level must lie in [2, 8]")

    def _int(self, sec, name, key, default):
        try:
            return int(sec.get(key, default))
        except ValueError as exc:
            raise ConfigError(f"{name}.{key} must be an integer: {exc}") from exc

    def _float(self, sec, name, key, default):
        try:
            return float(sec.get(key, default))
        except ValueError as exc:
            raise ConfigError(f"{name}.{key} must be a number: {exc}") from exc

    def section(self, name):
        return self._cp[name] if self._cp.has_section(name) else {}

    def amplitudes(self, name, default="1e-4,1e-2,6"):
        """Amplitude list: explicit 'a,b,c,...' or geometric 'lo,hi,count'."""
        sec = self.section(name)
        text = sec.get("amplitudes", default)
        vals = _floats(text)
        if len(vals) == 3 and vals[2] == int(vals[2]) and vals[2] >= 4:
            vals = np.geomspace(vals[0], vals[1], int(vals[2])).tolist()
        if any(v <= 0 for v in vals) or sorted(vals) != vals:
            raise ConfigError(f"{name}.amplitudes must be positive and sorted")
        return np.array(vals)

    def family(self, name, default="harmonic:2,0"):
        return parse_family(self.section(name).get("family", default))

    def floats(self, name, key, default):
        return _floats(self.section(name).get(key, default))

    def ints(self, name, key, default):
        return [int(v) for v in self.floats(name, key, default)]
