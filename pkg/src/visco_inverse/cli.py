"""Command-line experiment driver.

Usage::

    visco-inverse <study> --config <path> [--out <dir>] [--seed <int>]

The config is a single JSON file; see the README for the schema.  Each study
writes a CSV series (``<study>.csv``) and a JSON summary (``<study>.json``)
into the output directory.  The summary echoes the fully resolved
configuration so a run can be reproduced from its outputs alone.  Exit codes:
0 success, 2 validation problem, 3 numerical failure (singular Gram matrix
or an out-of-tolerance resolvent identity).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import NumericsError
from .forward import SourceCoefficients, boundary_trace_source
from .frames import (
    SINGULAR_GRAM_RTOL,
    gram,
    leading_frame_bounds,
    z_trace_family,
)
from .inverse import (
    build_reconstruction,
    l2_only_counterexample,
    noisy_reconstruction,
    stability_ratios,
)
from .modal import comparison_defect_scan
from .spectral import OperatorSpec, SpectralModel, build_spectral_model
from .volterra import (
    AffineModulation,
    ConstantModulation,
    ExponentialKernel,
    ExponentialModulation,
    MemoryKernel,
    PolynomialKernel,
    SampledKernel,
    SampledModulation,
    SourceModulation,
    TimeGrid,
    ZeroKernel,
    differentiate,
    h1_norm,
    l2_norm,
)

STUDIES = (
    "simulate",
    "reconstruct",
    "frame-bounds",
    "stability-scan",
    "zest-decay",
    "l2-counterexample",
)

#: relative resolvent-identity residual above which reconstruction aborts
IDENTITY_RESIDUAL_RTOL = 1e-3


def _require(mapping, key, what):
    if key not in mapping:
        raise ValueError(f"{what}: missing required key {key!r}")
    return mapping[key]


def _parse_kernel(raw) -> MemoryKernel:
    if raw is None:
        return ZeroKernel()
    if not isinstance(raw, dict):
        raise ValueError("kernel: expected an object with a 'variant' key")
    variant = _require(raw, "variant", "kernel")
    if variant == "zero":
        return ZeroKernel()
    if variant == "exponential":
        return ExponentialKernel(float(_require(raw, "beta", "kernel")),
                                 float(_require(raw, "alpha", "kernel")))
    if variant == "polynomial":
        return PolynomialKernel(tuple(_require(raw, "coefficients", "kernel")))
    if variant == "sampled":
        m0 = raw.get("m0")
        return SampledKernel(np.asarray(_require(raw, "values", "kernel"), dtype=float),
                             None if m0 is None else float(m0))
    raise ValueError(f"kernel: unknown variant {variant!r}")


def _parse_sigma(raw) -> SourceModulation:
    if raw is None:
        return ConstantModulation(1.0)
    if not isinstance(raw, dict):
        raise ValueError("sigma: expected an object with a 'form' key")
    form = _require(raw, "form", "sigma")
    if form == "constant":
        return ConstantModulation(float(_require(raw, "a", "sigma")))
    if form == "exponential":
        return ExponentialModulation(float(_require(raw, "a", "sigma")))
    if form == "affine":
        return AffineModulation(float(_require(raw, "a", "sigma")),
                                float(_require(raw, "b", "sigma")))
    if form == "sampled":
        return SampledModulation(np.asarray(_require(raw, "values", "sigma"), dtype=float))
    raise ValueError(f"sigma: unknown form {form!r}")


def _kernel_dict(kernel: MemoryKernel) -> dict:
    if isinstance(kernel, ZeroKernel):
        return {"variant": "zero"}
    if isinstance(kernel, ExponentialKernel):
        return {"variant": "exponential", "beta": kernel.beta, "alpha": kernel.alpha}
    if isinstance(kernel, PolynomialKernel):
        return {"variant": "polynomial", "coefficients": list(kernel.coefficients)}
    return {"variant": "sampled", "values": list(map(float, kernel.values)),
            "m0": kernel.m0}


def _sigma_dict(sigma: SourceModulation) -> dict:
    if isinstance(sigma, ConstantModulation):
        return {"form": "constant", "a": sigma.value}
    if isinstance(sigma, ExponentialModulation):
        return {"form": "exponential", "a": sigma.rate}
    if isinstance(sigma, AffineModulation):
        return {"form": "affine", "a": sigma.offset, "b": sigma.slope}
    return {"form": "sampled", "values": list(map(float, sigma.values))}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated, fully resolved description of one study run."""

    operator: OperatorSpec
    kernel: MemoryKernel
    sigma: SourceModulation
    grid: TimeGrid
    truncation: int
    study: str
    seed: int
    noise_level: float
    output: str
    source: str | int | list  # "random" | unit index | explicit coefficients
    measurement: str          # "bu_prime" or "bu"
    trials: int

    @classmethod
    def from_mapping(cls, raw: dict, study: str,
                     out_override: str | None = None,
                     seed_override: int | None = None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ValueError("config root must be a JSON object")
        if study not in STUDIES:
            raise ValueError(f"unknown study {study!r}")
        cfg_study = raw.get("study")
        if cfg_study is not None and cfg_study != study:
            raise ValueError(
                f"config names study {cfg_study!r} but {study!r} was requested"
            )

        op_raw = _require(raw, "operator", "config")
        operator = OperatorSpec(
            length=float(_require(op_raw, "length", "operator")),
            potential_shift=float(op_raw.get("potential_shift", 0.0)),
            observed_endpoints=tuple(op_raw.get("observed_endpoints", ["left"])),
        )

        grid_raw = _require(raw, "grid", "config")
        horizon = float(_require(grid_raw, "T", "grid"))
        dt = float(_require(grid_raw, "dt", "grid"))
        if horizon <= 0.0 or dt <= 0.0:
            raise ValueError("grid: T and dt must be positive")
        ratio = horizon / dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, abs(ratio)):
            raise ValueError(
                f"grid: T/dt = {ratio!r} must be an integer within 1e-9"
            )
        steps = int(round(ratio))
        if steps < 2:
            raise ValueError("grid: need at least 2 steps")
        grid = TimeGrid(horizon, steps)

        truncation = int(_require(raw, "N", "config"))
        if truncation < 1:
            raise ValueError("N must be at least 1")

        kernel = _parse_kernel(raw.get("kernel"))
        sigma = _parse_sigma(raw.get("sigma"))
        noise_level = float(raw.get("noise_level", 0.0))
        if noise_level < 0.0:
            raise ValueError("noise_level must be nonnegative")
        seed = int(raw.get("seed", 0)) if seed_override is None else int(seed_override)
        output = str(raw.get("output", "out")) if out_override is None else str(out_override)

        source = raw.get("source", "random")
        if isinstance(source, dict):
            if "unit" in source:
                source = int(source["unit"])
            elif "coefficients" in source:
                source = [float(v) for v in source["coefficients"]]
            else:
                raise ValueError("source: expected 'unit' or 'coefficients'")
        elif isinstance(source, list):
            source = [float(v) for v in source]
        elif source != "random":
            raise ValueError("source: expected 'random', a list, or an object")

        measurement = str(raw.get("measurement", "bu_prime"))
        if measurement not in ("bu_prime", "bu"):
            raise ValueError("measurement must be 'bu_prime' or 'bu'")
        trials = int(raw.get("trials", 50))
        if trials < 1:
            raise ValueError("trials must be at least 1")

        if study == "reconstruct" and sigma.at_zero() == 0.0:
            raise ValueError("sigma(0) must be nonzero for the reconstruct study")
        if study == "l2-counterexample" and not isinstance(kernel, ZeroKernel):
            raise ValueError("the l2-counterexample study requires the zero kernel")

        return cls(operator, kernel, sigma, grid, truncation, study, seed,
                   noise_level, output, source, measurement, trials)

    def resolve_source(self, model: SpectralModel) -> SourceCoefficients:
        if self.source == "random":
            rng = np.random.default_rng(self.seed)
            f = rng.standard_normal(model.truncation)
            return SourceCoefficients(f / np.linalg.norm(f))
        if isinstance(self.source, int):
            return SourceCoefficients.unit(self.source, model.truncation)
        vals = np.asarray(self.source, dtype=float)
        if vals.shape != (model.truncation,):
            raise ValueError(
                f"source coefficients must have length N = {model.truncation}"
            )
        return SourceCoefficients(vals)

    def effective(self, source_values=None) -> dict:
        out = {
            "operator": {
                "length": self.operator.length,
                "potential_shift": self.operator.potential_shift,
                "observed_endpoints": list(self.operator.observed_endpoints),
            },
            "kernel": _kernel_dict(self.kernel),
            "sigma": _sigma_dict(self.sigma),
            "grid": {"T": self.grid.horizon, "dt": self.grid.dt,
                     "steps": self.grid.steps},
            "N": self.truncation,
            "study": self.study,
            "seed": self.seed,
            "noise_level": self.noise_level,
            "output": self.output,
            "measurement": self.measurement,
            "trials": self.trials,
        }
        if source_values is not None:
            out["source"] = [float(v) for v in source_values]
        return out


# ---------------------------------------------------------------------------
# Studies.  Each returns (header, rows, results, diagnostics) and may signal
# a numerical failure by raising NumericsError after partial output.


def _study_simulate(cfg: ExperimentConfig, model: SpectralModel):
    f = cfg.resolve_source(model)
    bu, bu_prime = boundary_trace_source(f, cfg.sigma, model, cfg.kernel, cfg.grid)
    header = ["t"]
    for ep in cfg.operator.observed_endpoints:
        header += [f"bu_{ep}", f"bu_prime_{ep}"]
    cols = [cfg.grid.nodes]
    for c in range(model.dim):
        cols += [bu.values[:, c].real, bu_prime.values[:, c].real]
    rows = np.column_stack(cols)
    results = {
        "h1_norm_bu": h1_norm(bu),
        "l2_norm_bu_prime": l2_norm(bu_prime),
        "source_norm": float(np.linalg.norm(f.values)),
    }
    diagnostics = {
        "max_imag_bu": float(np.max(np.abs(bu.values.imag))),
        "max_imag_bu_prime": float(np.max(np.abs(bu_prime.values.imag))),
    }
    return header, rows, results, diagnostics, f.values


def _study_reconstruct(cfg: ExperimentConfig, model: SpectralModel):
    f = cfg.resolve_source(model)
    bu, bu_prime = boundary_trace_source(f, cfg.sigma, model, cfg.kernel, cfg.grid)
    kernels = build_reconstruction(model, cfg.kernel, cfg.sigma, cfg.grid)
    w = cfg.grid.weights
    sq = np.tensordot(np.abs(kernels.duals.values) ** 2, w, axes=(1, 0))  # (N, m)
    dual_scale = float(np.sqrt(sq.sum(axis=1).max())) or 1.0
    if kernels.identity_residual > IDENTITY_RESIDUAL_RTOL * dual_scale:
        raise NumericsError(
            "resolvent identity residual "
            f"{kernels.identity_residual:.3e} exceeds tolerance"
        )
    measured = bu_prime if cfg.measurement == "bu_prime" else differentiate(bu)
    report = noisy_reconstruction(
        measured, cfg.noise_level, cfg.seed, kernels, model, truth=f
    )
    header = ["n", "f_true", "f_recovered", "abs_error"]
    rows = np.column_stack([
        np.arange(1, model.truncation + 1),
        f.values,
        report.recovered.values,
        report.per_mode_error,
    ])
    results = {
        "relative_l2_error": report.relative_l2_error,
        "frame_lower": report.bounds.lower,
        "frame_upper": report.bounds.upper,
        "sigma0": kernels.sigma0,
    }
    diagnostics = {
        "imag_residual": report.imag_residual,
        "identity_residual": kernels.identity_residual,
        "noise_level": cfg.noise_level,
        "measurement": cfg.measurement,
    }
    return header, rows, results, diagnostics, f.values


def _study_frame_bounds(cfg: ExperimentConfig, model: SpectralModel):
    family = z_trace_family(model, cfg.kernel, cfg.grid)
    g = gram(family)
    sizes = []
    k = 1
    while k < model.truncation:
        sizes.append(k)
        k *= 2
    sizes.append(model.truncation)
    bounds = leading_frame_bounds(g, [2 * k for k in sizes])
    header = ["truncation", "members", "min_eig", "max_eig"]
    rows = np.column_stack([
        np.array(sizes, dtype=float),
        np.array([2 * k for k in sizes], dtype=float),
        np.array([b.lower for b in bounds]),
        np.array([b.upper for b in bounds]),
    ])
    full = bounds[-1]
    results = {"frame_lower": full.lower, "frame_upper": full.upper,
               "ratio": full.lower / full.upper if full.upper > 0 else float("nan")}
    diagnostics = {}
    if full.upper <= 0.0 or full.lower <= SINGULAR_GRAM_RTOL * full.upper:
        diagnostics["failure"] = "singular Gram"
    return header, rows, results, diagnostics, None


def _study_stability_scan(cfg: ExperimentConfig, model: SpectralModel):
    ratios = stability_ratios(
        model, cfg.kernel, cfg.sigma, cfg.grid, cfg.trials, cfg.seed
    )
    header = ["trial", "ratio"]
    rows = np.column_stack([np.arange(len(ratios), dtype=float), ratios])
    results = {"min_ratio": float(ratios.min()), "max_ratio": float(ratios.max()),
               "median_ratio": float(np.median(ratios))}
    return header, rows, results, {}, None


def _study_zest_decay(cfg: ExperimentConfig, model: SpectralModel):
    indices = [m.index for m in model.positive_modes if m.branch == "J1"]
    if not indices:
        raise ValueError("zest-decay needs at least one nonzero branch value")
    defects = comparison_defect_scan(model, cfg.kernel, cfg.grid, indices)
    header = ["n", "lambda", "defect"]
    rows = np.column_stack([
        np.array(indices, dtype=float),
        np.array([abs(model.mode(n).lam) for n in indices]),
        defects,
    ])
    results = {
        "max_defect": float(defects.max()),
        "min_defect": float(defects.min()),
    }
    return header, rows, results, {"skipped_zero_branch": model.truncation - len(indices)}, None


def _study_l2_counterexample(cfg: ExperimentConfig, model: SpectralModel):
    table = l2_only_counterexample(model, cfg.sigma, cfg.grid, model.truncation)
    header = ["n", "lambda", "scaled_norm", "min_gram_eig"]
    rows = np.column_stack([
        table.indices.astype(float),
        np.abs(table.lams),
        table.scaled_norms,
        table.min_gram_eigs,
    ])
    results = {
        "scaled_norm_min": float(table.scaled_norms.min()),
        "scaled_norm_max": float(table.scaled_norms.max()),
        "final_min_gram_eig": float(table.min_gram_eigs[-1]),
    }
    return header, rows, results, {}, None


_RUNNERS = {
    "simulate": _study_simulate,
    "reconstruct": _study_reconstruct,
    "frame-bounds": _study_frame_bounds,
    "stability-scan": _study_stability_scan,
    "zest-decay": _study_zest_decay,
    "l2-counterexample": _study_l2_counterexample,
}


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in np.atleast_2d(rows):
            writer.writerow([repr(float(v)) for v in row])


def _write_summary(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run(cfg: ExperimentConfig) -> int:
    """Execute the configured study, write its outputs, return an exit code."""
    try:
        outdir = Path(cfg.output)
        outdir.mkdir(parents=True, exist_ok=True)
        csv_path = outdir / f"{cfg.study}.csv"
        model = build_spectral_model(cfg.operator, cfg.truncation)
        failure = None
        try:
            header, rows, results, diagnostics, source_values = _RUNNERS[cfg.study](cfg, model)
        except NumericsError as exc:
            failure = str(exc)
            header = rows = None
            results, diagnostics, source_values = {}, {}, None
        if failure is None:
            failure = diagnostics.pop("failure", None)
        if rows is not None:
            _write_csv(csv_path, header, rows)
        diagnostics = dict(diagnostics)
        diagnostics["timestamp"] = datetime.now(timezone.utc).isoformat()
        diagnostics["exit"] = failure if failure else "ok"
        summary = {
            "study": cfg.study,
            "config": cfg.effective(source_values),
            "results": results,
            "diagnostics": diagnostics,
        }
        _write_summary(outdir / f"{cfg.study}.json", summary)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if failure:
        print(f"{cfg.study}: FAILED ({failure}); outputs in {outdir}", file=sys.stderr)
        return 3
    scalars = ", ".join(f"{k}={v:.6g}" for k, v in results.items()
                        if isinstance(v, (int, float)) and math.isfinite(v))
    print(f"{cfg.study}: ok ({scalars}); outputs in {outdir}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="visco-inverse",
        description="Run a numbered study from a JSON experiment config.",
    )
    parser.add_argument("study", choices=STUDIES)
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="seed override")
    args = parser.parse_args(argv)

    try:
        raw = json.loads(Path(args.config).read_text())
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = ExperimentConfig.from_mapping(
            raw, args.study, out_override=args.out, seed_override=args.seed
        )
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
