"""Experiment configuration: flat INI sections, one per module.

Every knob named in the design notes is exposed here; `default_config()`
returns the values the acceptance suite runs with, and `load_config` merges
a user file over the defaults.
"""

from __future__ import annotations

import configparser
import io

from .errors import ConfigError

DEFAULTS = {
    "run": {
        "seed": "0",
        "threads": "1",
    },
    "geometry": {
        "samples": "10000",
        "tol": "1e-10",
        "beta_cap": "1e3",
        "order_beta_M": "2.0",
        "mc_samples": "600000",
    },
    "kernels": {
        "circle_nodes": "2048",
        "polar_nodes": "256",
        "azim_nodes": "384",
        "radial_nodes": "40",
        "annulus_tol_kolmogorov": "1e-6",
        "annulus_tol_parabolic": "1e-8",
        "pde_h": "1e-3",
        "golden_rtol": "1e-10",
    },
    "harmonics": {
        "m_max": "16",
        "decay_lo": "4",
        "decay_hi": "16",
        "asymptotic_lo": "96",
        "asymptotic_hi": "192",
        "ortho_tol": "1e-10",
        "m0_tol": "1e-8",
    },
    "dyadic": {
        "delta": "0.125",
        "grids": "3",
        "kolmogorov_grids": "4",
        "min_scale_cells": "1.0",
        "cz_lambda": "0.15",
        "doubling_stability": "0.20",
    },
    "operators": {
        "eps_cells": "1.05",
        "s_dilation": "5.0",
        "s_dilation_kolmogorov": "3.0",
        "n_pairs": "32",
        "k_subset": "3",
    },
    "sparse": {
        "lam": "0.25",
        "min_cells": "8",
        "alpha0": "2.0",
        "budget": "0.01",
        "m_values": "1,2,4,8",
        "stability": "0.30",
    },
    "weights": {
        "p_values": "2.0,1.5",
        "gamma_factors": "0.8,1.08,1.36,1.64,1.92,2.2",
        "gamma_factors_p15": "0.8,1.24,1.68,2.12,2.56,3.0",
        "delta_sweep": "0.05,0.1,0.2,0.4",
        "bmo_radius": "1.0",
    },
    "orlicz": {
        "holder_pairs": "100",
        "stability": "0.30",
    },
    "estimates": {
        "parabolic_resolution": "256,256",
        "kolmogorov_resolution": "48,48,48",
        "parabolic_refined": "320,320",
        "kolmogorov_refined": "60,60,60",
        "m_values_parabolic": "2,4,8",
        "m_values_kolmogorov": "2,4,8",
        "kolmogorov_criterion_m": "2",
        "n_eval": "96",
        "eps_cells_parabolic": "1.2",
        "eps_cells_kolmogorov": "1.0",
        "margin_cells": "4",
        "parabolic_error_bound": "0.10",
        "kolmogorov_error_bound": "0.20",
        "stability": "0.30",
    },
}

SUITES = ("geometry", "kernels", "harmonics", "dyadic", "operators", "sparse",
          "weights", "orlicz", "estimates", "all")


def default_config() -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.read_dict(DEFAULTS)
    return cp


def load_config(path=None) -> configparser.ConfigParser:
    cp = default_config()
    if path is not None:
        read = cp.read(str(path))
        if not read:
            raise ConfigError(f"could not read config file {path}")
    return cp


def dump_default(path) -> None:
    cp = default_config()
    with open(path, "w") as fh:
        cp.write(fh)


def config_text(cp: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def get_floats(cp, section, key):
    return [float(v) for v in cp[section][key].split(",")]


def get_ints(cp, section, key):
    return [int(v) for v in cp[section][key].split(",")]
