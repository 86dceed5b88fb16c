"""Batch command-line front end.

One binary with subcommands: render, dataset, extract-illum, extract-ccr,
generate, relight, invert, gradcheck, eval. Every command takes a strict
JSON config (unknown fields are rejected and errors name the offending JSON
path), writes its outputs plus a ``manifest.json`` with content digests, and
exits 0 on success, 1 on config errors, 2 on IO errors, 3 on numeric
failures. Relative paths inside a config resolve against the config file's
directory. Re-running a command with the same config and seed in
``--reference`` mode reproduces the manifest byte for byte; wall-clock
timing therefore goes to the log, not the manifest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import replace as dc_replace
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .ccr import CcrConfig, extract_ccr
from .diffusion import (
    EmpiricalScore,
    GaussianScore,
    VpSchedule,
    chain_seed,
    ddim_invert,
    relight,
    sample_chains,
)
from .energy import GuidanceConfig, eval_energy, fd_gradient, grad_energy
from .errors import LumiguideError, ParameterError, SamplingDivergence
from .fileio import load_image, write_pfm, write_ppm
from .illum import (
    LightPrompt,
    RetinexConfig,
    compose_prompt,
    extract_illumination,
    prompt_from_json,
)
from .scenegen import (
    DirectionalLight,
    HalfPlane,
    SceneSpec,
    Sphere,
    light_ring,
    make_dataset,
    random_sphere_scene,
    render,
    unit,
)

log = logging.getLogger("lumiguide")


class ConfigError(Exception):
    """Invalid run configuration; the message names the offending JSON path."""


class GradCheckFailure(ArithmeticError):
    """Analytic gradient disagrees with finite differences beyond tolerance."""


# --- strict config parsing helpers ---------------------------------------


def _expect_keys(obj, path: str, required=(), optional=()) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    allowed = set(required) | set(optional)
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown field")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{path}.{key}: missing required field")
    return obj


def _number(obj, path: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(f"{path}: expected a number")
    return float(obj)


def _integer(obj, path: str) -> int:
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise ConfigError(f"{path}: expected an integer")
    return obj


def _boolean(obj, path: str) -> bool:
    if not isinstance(obj, bool):
        raise ConfigError(f"{path}: expected a boolean")
    return obj


def _string(obj, path: str) -> str:
    if not isinstance(obj, str):
        raise ConfigError(f"{path}: expected a string")
    return obj


def _vector(obj, path: str, length: int) -> tuple:
    if not isinstance(obj, list) or len(obj) != length:
        raise ConfigError(f"{path}: expected a list of {length} numbers")
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(obj))


def _existing_path(obj, path: str, base: Path) -> Path:
    p = base / _string(obj, path)
    if not p.exists():
        raise ConfigError(f"{path}: no such file {p}")
    return p


def _parse_schedule(obj, path: str) -> VpSchedule:
    obj = _expect_keys(obj, path, required=("steps",), optional=("beta_min", "beta_max"))
    try:
        return VpSchedule(
            beta_min=_number(obj.get("beta_min", 0.1), f"{path}.beta_min"),
            beta_max=_number(obj.get("beta_max", 20.0), f"{path}.beta_max"),
            steps=_integer(obj["steps"], f"{path}.steps"),
        )
    except ParameterError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_retinex(obj, path: str) -> RetinexConfig:
    if obj is None:
        return RetinexConfig()
    obj = _expect_keys(obj, path, optional=("scales", "weights", "channel_average"))
    kwargs = {}
    if "scales" in obj:
        scales = obj["scales"]
        if not isinstance(scales, list) or not scales:
            raise ConfigError(f"{path}.scales: expected a non-empty list")
        kwargs["scales"] = tuple(
            _number(s, f"{path}.scales[{i}]") for i, s in enumerate(scales)
        )
    if "weights" in obj and obj["weights"] is not None:
        weights = obj["weights"]
        if not isinstance(weights, list):
            raise ConfigError(f"{path}.weights: expected a list")
        kwargs["weights"] = tuple(
            _number(w, f"{path}.weights[{i}]") for i, w in enumerate(weights)
        )
    if "channel_average" in obj:
        kwargs["channel_average"] = _boolean(obj["channel_average"], f"{path}.channel_average")
    try:
        return RetinexConfig(**kwargs)
    except ParameterError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_ccr(obj, path: str) -> CcrConfig:
    if obj is None:
        return CcrConfig()
    obj = _expect_keys(obj, path, optional=("epsilon", "neighbor"))
    try:
        return CcrConfig(
            epsilon=_number(obj.get("epsilon", 1e-4), f"{path}.epsilon"),
            neighbor=_string(obj.get("neighbor", "right"), f"{path}.neighbor"),
        )
    except ParameterError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_prompt(obj, path: str) -> LightPrompt:
    obj = _expect_keys(obj, path, required=("components",), optional=("base",))
    for i, comp in enumerate(obj["components"]):
        _expect_keys(comp, f"{path}.components[{i}]", required=("alpha", "mu", "sigma"))
    try:
        return prompt_from_json(obj)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_light(obj, path: str) -> DirectionalLight:
    obj = _expect_keys(obj, path, required=("direction", "intensity"), optional=("ambient",))
    direction = _vector(obj["direction"], f"{path}.direction", 3)
    try:
        return DirectionalLight(
            direction=unit(direction),
            intensity=_number(obj["intensity"], f"{path}.intensity"),
            ambient=_number(obj.get("ambient", 0.0), f"{path}.ambient"),
        )
    except ParameterError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_lights(obj, path: str) -> list[DirectionalLight]:
    if isinstance(obj, dict):
        obj = _expect_keys(obj, path, required=("ring",))
        ring = _expect_keys(
            obj["ring"], f"{path}.ring", optional=("count", "z", "intensity", "ambient")
        )
        try:
            return light_ring(
                count=_integer(ring.get("count", 8), f"{path}.ring.count"),
                z=_number(ring.get("z", 0.5), f"{path}.ring.z"),
                intensity=_number(ring.get("intensity", 0.8), f"{path}.ring.intensity"),
                ambient=_number(ring.get("ambient", 0.2), f"{path}.ring.ambient"),
            )
        except ParameterError as exc:
            raise ConfigError(f"{path}.ring: {exc}") from exc
    if isinstance(obj, list) and obj:
        return [_parse_light(o, f"{path}[{i}]") for i, o in enumerate(obj)]
    raise ConfigError(f"{path}: expected a light list or a ring spec")


def _parse_scene(obj, path: str) -> SceneSpec:
    obj = _expect_keys(
        obj, path, required=("resolution", "background_albedo"), optional=("objects",)
    )
    resolution = obj["resolution"]
    if not isinstance(resolution, list) or len(resolution) != 2:
        raise ConfigError(f"{path}.resolution: expected [height, width]")
    h = _integer(resolution[0], f"{path}.resolution[0]")
    w = _integer(resolution[1], f"{path}.resolution[1]")
    objects = []
    for i, o in enumerate(obj.get("objects", [])):
        opath = f"{path}.objects[{i}]"
        o = _expect_keys(
            o,
            opath,
            required=("type",),
            optional=("center", "radius", "albedo", "normal", "offset"),
        )
        kind = _string(o["type"], f"{opath}.type")
        try:
            if kind == "sphere":
                objects.append(
                    Sphere(
                        center=_vector(o["center"], f"{opath}.center", 2),
                        radius=_number(o["radius"], f"{opath}.radius"),
                        albedo=_vector(o["albedo"], f"{opath}.albedo", 3),
                    )
                )
            elif kind == "half_plane":
                objects.append(
                    HalfPlane(
                        normal=_vector(o["normal"], f"{opath}.normal", 2),
                        offset=_number(o["offset"], f"{opath}.offset"),
                        albedo=_vector(o["albedo"], f"{opath}.albedo", 3),
                    )
                )
            else:
                raise ConfigError(f"{opath}.type: unknown object type {kind!r}")
        except KeyError as exc:
            raise ConfigError(f"{opath}.{exc.args[0]}: missing required field") from exc
        except ParameterError as exc:
            raise ConfigError(f"{opath}: {exc}") from exc
    try:
        return SceneSpec(
            background_albedo=_vector(obj["background_albedo"], f"{path}.background_albedo", 3),
            objects=tuple(objects),
            resolution=(h, w),
        )
    except ParameterError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_provider(obj, path: str, base: Path, schedule: VpSchedule):
    obj = _expect_keys(
        obj, path, required=("type",), optional=("dataset", "mean", "var", "size")
    )
    kind = _string(obj["type"], f"{path}.type")
    if kind == "empirical":
        if "dataset" not in obj:
            raise ConfigError(f"{path}.dataset: missing required field")
        dataset_dir = _existing_path(obj["dataset"], f"{path}.dataset", base)
        files = sorted(dataset_dir.glob("*.pfm"))
        if not files:
            raise ConfigError(f"{path}.dataset: no .pfm files in {dataset_dir}")
        images = [load_image(f) for f in files]
        return EmpiricalScore(images, schedule)
    if kind == "gaussian":
        if "mean" not in obj or "var" not in obj:
            raise ConfigError(f"{path}: gaussian provider needs 'mean' and 'var'")
        var = _number(obj["var"], f"{path}.var")
        if isinstance(obj["mean"], str):
            mean = load_image(_existing_path(obj["mean"], f"{path}.mean", base))
        else:
            level = _number(obj["mean"], f"{path}.mean")
            size = obj.get("size")
            if size is None:
                raise ConfigError(f"{path}.size: required for a constant gaussian mean")
            h, w = (_integer(v, f"{path}.size[{i}]") for i, v in enumerate(size))
            mean = np.full((h, w, 3), level)
        try:
            return GaussianScore(mean, var, schedule)
        except ParameterError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.type: unknown provider type {kind!r}")


def _parse_guidance(
    obj, path: str, default_lambda_r: float = 50.0
) -> tuple[GuidanceConfig, LightPrompt | None]:
    obj = _expect_keys(
        obj,
        path,
        optional=("lambda_i", "lambda_r", "eval_point", "prompt", "retinex", "ccr"),
    )
    prompt = None
    if "prompt" in obj and obj["prompt"] is not None:
        prompt = _parse_prompt(obj["prompt"], f"{path}.prompt")
    try:
        cfg = GuidanceConfig(
            lambda_i=_number(obj.get("lambda_i", 100.0), f"{path}.lambda_i"),
            lambda_r=_number(obj.get("lambda_r", default_lambda_r), f"{path}.lambda_r"),
            retinex=_parse_retinex(obj.get("retinex"), f"{path}.retinex"),
            ccr=_parse_ccr(obj.get("ccr"), f"{path}.ccr"),
            eval_point=_string(obj.get("eval_point", "on_denoised"), f"{path}.eval_point"),
        )
    except ParameterError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg, prompt


# --- outputs and manifests -------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


class OutputSet:
    """Collects written files so the manifest can record their digests."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: list[str] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out_dir / name

    def write_json(self, name: str, payload) -> None:
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        self.path(name).write_text(text)

    def write_manifest(self, command: str, config: dict, seeds: list) -> None:
        manifest = {
            "command": command,
            "config_hash": _config_hash(config),
            "seeds": seeds,
            "version": __version__,
            "outputs": {name: _sha256(self.out_dir / name) for name in sorted(self.files)},
        }
        text = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        (self.out_dir / "manifest.json").write_text(text)


def _write_trace_csv(path: Path, trace) -> None:
    lines = ["step,t,total,illum,geom"]
    for step, (t, b) in enumerate(trace):
        lines.append(f"{step},{t!r},{b.total!r},{b.illum_term!r},{b.geom_term!r}")
    path.write_text("\n".join(lines) + "\n")


# --- subcommands -----------------------------------------------------------


def cmd_render(config: dict, base: Path, out: OutputSet, args) -> int:
    _expect_keys(config, "config", required=("scene", "light"))
    spec = _parse_scene(config["scene"], "config.scene")
    light = _parse_light(config["light"], "config.light")
    result = render(spec, light)
    write_pfm(out.path("image.pfm"), result.image)
    write_pfm(out.path("reflectance.pfm"), result.reflectance)
    write_pfm(out.path("shading.pfm"), result.shading)
    write_pfm(out.path("normals.pfm"), result.normals)
    write_ppm(out.path("image.ppm"), result.image)
    out.write_json(
        "render.json",
        {"scene": config["scene"], "light": config["light"], "seed": args.seed},
    )
    out.write_manifest("render", config, [])
    return 0


def cmd_dataset(config: dict, base: Path, out: OutputSet, args) -> int:
    _expect_keys(
        config, "config", required=("seed", "count", "lights"), optional=("resolution", "scene")
    )
    seed = args.seed if args.seed is not None else _integer(config["seed"], "config.seed")
    count = _integer(config["count"], "config.count")
    if count < 1:
        raise ConfigError("config.count: must be >= 1")
    resolution = config.get("resolution", [32, 32])
    h = _integer(resolution[0], "config.resolution[0]")
    w = _integer(resolution[1], "config.resolution[1]")
    lights = _parse_lights(config["lights"], "config.lights")
    scene_cfg = config.get("scene")
    if scene_cfg is None:
        template = partial(random_sphere_scene, resolution=(h, w))
    else:
        template = _parse_scene(scene_cfg, "config.scene")
    images = make_dataset(seed, count, template, lights)
    for i, img in enumerate(images):
        write_pfm(out.path(f"img_{i:04d}.pfm"), img)
    out.write_json(
        "dataset.json",
        {
            "seed": seed,
            "count": count,
            "resolution": [h, w],
            "light_assignment": [i % len(lights) for i in range(count)],
        },
    )
    out.write_manifest("dataset", config, [seed])
    return 0


def cmd_extract_illum(config: dict, base: Path, out: OutputSet, args) -> int:
    _expect_keys(config, "config", required=("input",), optional=("retinex",))
    img = load_image(_existing_path(config["input"], "config.input", base))
    cfg = _parse_retinex(config.get("retinex"), "config.retinex")
    write_pfm(out.path("illum.pfm"), extract_illumination(img, cfg))
    out.write_manifest("extract-illum", config, [])
    return 0


def cmd_extract_ccr(config: dict, base: Path, out: OutputSet, args) -> int:
    _expect_keys(config, "config", required=("input",), optional=("ccr",))
    img = load_image(_existing_path(config["input"], "config.input", base))
    cfg = _parse_ccr(config.get("ccr"), "config.ccr")
    write_pfm(out.path("ccr.pfm"), extract_ccr(img, cfg))
    out.write_manifest("extract-ccr", config, [])
    return 0


def cmd_generate(config: dict, base: Path, out: OutputSet, args) -> int:
    _expect_keys(
        config,
        "config",
        required=("schedule", "provider", "size", "chains", "seed"),
        optional=("guidance",),
    )
    schedule = _parse_schedule(config["schedule"], "config.schedule")
    provider = _parse_provider(config["provider"], "config.provider", base, schedule)
    h, w = (_integer(v, f"config.size[{i}]") for i, v in enumerate(config["size"]))
    chains = _integer(config["chains"], "config.chains")
    if chains < 1:
        raise ConfigError("config.chains: must be >= 1")
    seed = args.seed if args.seed is not None else _integer(config["seed"], "config.seed")
    guidance = None
    if config.get("guidance") is not None:
        guidance, prompt = _parse_guidance(
            config["guidance"], "config.guidance", default_lambda_r=0.0
        )
        if guidance.lambda_i > 0:
            if prompt is None:
                raise ConfigError("config.guidance.prompt: required when lambda_i > 0")
            guidance = dc_replace(guidance, target_illum=compose_prompt(prompt, (h, w)))
        if guidance.lambda_r > 0:
            raise ConfigError(
                "config.guidance.lambda_r: generation has no geometry target; "
                "set lambda_r to 0 or use the relight command"
            )
    threads = 1 if args.reference else max(1, args.threads)
    runs = sample_chains(provider, schedule, (h, w, 3), seed, chains, guidance, threads)
    for i, run in enumerate(runs):
        final = np.clip(run.final, 0.0, 1.0)
        write_pfm(out.path(f"final_{i:03d}.pfm"), run.final)
        write_ppm(out.path(f"final_{i:03d}.ppm"), final)
        if run.energy_trace is not None:
            _write_trace_csv(out.path(f"trace_{i:03d}.csv"), run.energy_trace)
    out.write_manifest("generate", config, [list(chain_seed(seed, k)) for k in range(chains)])
    return 0


def cmd_invert(config: dict, base: Path, out: OutputSet, args) -> int:
    _expect_keys(config, "config", required=("input", "schedule", "provider"))
    schedule = _parse_schedule(config["schedule"], "config.schedule")
    provider = _parse_provider(config["provider"], "config.provider", base, schedule)
    img = load_image(_existing_path(config["input"], "config.input", base))
    write_pfm(out.path("latent.pfm"), ddim_invert(img, provider, schedule))
    out.write_manifest("invert", config, [])
    return 0


def cmd_relight(config: dict, base: Path, out: OutputSet, args) -> int:
    _expect_keys(
        config,
        "config",
        required=("input", "schedule", "provider", "prompt"),
        optional=("guidance",),
    )
    schedule = _parse_schedule(config["schedule"], "config.schedule")
    provider = _parse_provider(config["provider"], "config.provider", base, schedule)
    img = load_image(_existing_path(config["input"], "config.input", base))
    prompt = _parse_prompt(config["prompt"], "config.prompt")
    guidance, _ = _parse_guidance(config.get("guidance") or {}, "config.guidance")
    run = relight(img, prompt, provider, schedule, guidance)
    write_pfm(out.path("relit.pfm"), run.final)
    write_ppm(out.path("relit.ppm"), np.clip(run.final, 0.0, 1.0))
    if run.energy_trace is not None:
        _write_trace_csv(out.path("trace.csv"), run.energy_trace)
    out.write_manifest("relight", config, [])
    return 0


def cmd_gradcheck(config: dict, base: Path, out: OutputSet, args) -> int:
    _expect_keys(
        config,
        "config",
        optional=(
            "size",
            "seed",
            "trials",
            "fd_step",
            "tolerance",
            "lambda_i",
            "lambda_r",
            "retinex",
            "ccr",
        ),
    )
    size = config.get("size", [8, 8])
    h = _integer(size[0], "config.size[0]")
    w = _integer(size[1], "config.size[1]")
    seed = args.seed if args.seed is not None else _integer(config.get("seed", 0), "config.seed")
    trials = _integer(config.get("trials", 10), "config.trials")
    fd_step = _number(config.get("fd_step", 1e-3), "config.fd_step")
    tolerance = _number(config.get("tolerance", 1e-4), "config.tolerance")
    lambda_i = _number(config.get("lambda_i", 100.0), "config.lambda_i")
    lambda_r = _number(config.get("lambda_r", 50.0), "config.lambda_r")
    retinex = _parse_retinex(config.get("retinex"), "config.retinex")
    ccr_cfg = _parse_ccr(config.get("ccr"), "config.ccr")
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(trials):
        x = rng.uniform(0.1, 0.9, (h, w, 3))
        cfg = GuidanceConfig(
            lambda_i=lambda_i,
            lambda_r=lambda_r,
            target_illum=extract_illumination(rng.uniform(0.1, 0.9, (h, w, 3)), retinex),
            target_ccr=extract_ccr(rng.uniform(0.1, 0.9, (h, w, 3)), ccr_cfg),
            retinex=retinex,
            ccr=ccr_cfg,
        )
        analytic = grad_energy(x, cfg)
        fd = fd_gradient(x, cfg, fd_step)
        errors.append(float(np.linalg.norm(analytic - fd) / np.linalg.norm(fd)))
    report = {
        "trials": trials,
        "fd_step": fd_step,
        "tolerance": tolerance,
        "max_relative_error": max(errors),
        "mean_relative_error": sum(errors) / len(errors),
    }
    out.write_json("gradcheck.json", report)
    out.write_manifest("gradcheck", config, [seed])
    print(
        f"gradcheck: max relative error {report['max_relative_error']:.3e}, "
        f"mean {report['mean_relative_error']:.3e} over {trials} trials"
    )
    if report["max_relative_error"] > tolerance:
        raise GradCheckFailure(
            f"max relative error {report['max_relative_error']:.3e} exceeds {tolerance:.1e}"
        )
    return 0


def cmd_eval(config: dict, base: Path, out: OutputSet, args) -> int:
    """Guided-vs-unguided illumination error, one row per condition."""
    _expect_keys(
        config,
        "config",
        required=("schedule", "provider", "size", "seeds", "conditions"),
        optional=("seed", "lambda_i", "eval_point"),
    )
    schedule = _parse_schedule(config["schedule"], "config.schedule")
    provider = _parse_provider(config["provider"], "config.provider", base, schedule)
    h, w = (_integer(v, f"config.size[{i}]") for i, v in enumerate(config["size"]))
    n_seeds = _integer(config["seeds"], "config.seeds")
    if n_seeds < 1:
        raise ConfigError("config.seeds: must be >= 1")
    base_seed = args.seed if args.seed is not None else _integer(
        config.get("seed", 0), "config.seed"
    )
    lambda_i = _number(config.get("lambda_i", 300.0), "config.lambda_i")
    conditions = config["conditions"]
    if not isinstance(conditions, list) or not conditions:
        raise ConfigError("config.conditions: expected a non-empty list")
    threads = 1 if args.reference else max(1, args.threads)

    rows = []
    for ci, cond in enumerate(conditions):
        cond = _expect_keys(cond, f"config.conditions[{ci}]", required=("name", "prompt"))
        name = _string(cond["name"], f"config.conditions[{ci}].name")
        prompt = _parse_prompt(cond["prompt"], f"config.conditions[{ci}].prompt")
        y_s = compose_prompt(prompt, (h, w))
        guided_cfg = GuidanceConfig(lambda_i=lambda_i, lambda_r=0.0, target_illum=y_s)
        measure = GuidanceConfig(lambda_i=1.0, lambda_r=0.0, target_illum=y_s)
        guided_runs = sample_chains(
            provider, schedule, (h, w, 3), base_seed, n_seeds, guided_cfg, threads
        )
        unguided_runs = sample_chains(
            provider, schedule, (h, w, 3), base_seed, n_seeds, None, threads
        )
        guided = [
            eval_energy(np.clip(r.final, 0.0, 1.0), measure).illum_term for r in guided_runs
        ]
        unguided = [
            eval_energy(np.clip(r.final, 0.0, 1.0), measure).illum_term for r in unguided_runs
        ]
        rows.append((name, float(np.mean(guided)), float(np.mean(unguided))))

    mean_g = float(np.mean([r[1] for r in rows]))
    mean_u = float(np.mean([r[2] for r in rows]))
    width = max(len(r[0]) for r in rows + [("condition", 0, 0), ("mean", 0, 0)])
    print(f"{'condition':<{width}}  {'guided':>10}  {'unguided':>10}")
    for name, g, u in rows:
        print(f"{name:<{width}}  {g:>10.6f}  {u:>10.6f}")
    print(f"{'mean':<{width}}  {mean_g:>10.6f}  {mean_u:>10.6f}")

    lines = ["condition,guided,unguided"]
    lines += [f"{name},{g!r},{u!r}" for name, g, u in rows]
    lines.append(f"mean,{mean_g!r},{mean_u!r}")
    out.path("eval.csv").write_text("\n".join(lines) + "\n")
    out.write_manifest(
        "eval", config, [list(chain_seed(base_seed, k)) for k in range(n_seeds)]
    )
    return 0


_COMMANDS = {
    "render": cmd_render,
    "dataset": cmd_dataset,
    "extract-illum": cmd_extract_illum,
    "extract-ccr": cmd_extract_ccr,
    "generate": cmd_generate,
    "invert": cmd_invert,
    "relight": cmd_relight,
    "gradcheck": cmd_gradcheck,
    "eval": cmd_eval,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lumiguide",
        description="Physics-guided diffusion sampling for illumination control.",
    )
    parser.add_argument("--version", action="version", version=f"lumiguide {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="parallel chains")
        p.add_argument(
            "--reference",
            action="store_true",
            help="single-threaded deterministic reference mode",
        )
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    config_path = Path(args.config)
    started = time.monotonic()
    try:
        try:
            raw = config_path.read_text()
        except OSError as exc:
            log.error("cannot read config: %s", exc)
            return 2
        try:
            config = json.loads(raw)
        except json.JSONDecodeError as exc:
            log.error("config is not valid JSON: %s", exc)
            return 1
        if not isinstance(config, dict):
            log.error("config: expected a JSON object")
            return 1
        out = OutputSet(Path(args.out))
        code = _COMMANDS[args.command](config, config_path.parent, out, args)
        log.info("%s finished in %.2fs", args.command, time.monotonic() - started)
        return code
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 1
    except (SamplingDivergence, GradCheckFailure) as exc:
        log.error("numeric failure: %s", exc)
        return 3
    except LumiguideError as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("io error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
