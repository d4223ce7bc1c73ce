"""Command-line frontend: one subcommand per experiment, deterministic
outputs, and a content-addressed result cache.

Exit codes: 0 success, 2 validation error, 3 numerical-quality failure.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .io import config_hash, file_sha256, write_csv, write_json, write_pgm
from .lattice import (GaugeField, IncommensurateFluxError, LatticeGeometry,
                      QuarterCircleFlux, StripeFlux, UniformFlux)
from .operators import TimeFrame, quasienergies, unitarity_defect
from .spectra import band_structure, butterfly, gap_table, ribbon_spectrum
from .topology import (NotInGapError, QuantizationError, bulk_boundary_check,
                       chern_spectrum, rlbl_invariant, rlbl_spectrum)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_QUALITY = 3


class ValidationError(ValueError):
    pass


class QualityError(RuntimeError):
    pass


# ----------------------------------------------------------------------
# config plumbing
# ----------------------------------------------------------------------


def _load_config_file(path):
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"bad config line: {raw.rstrip()}")
            key, val = line.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _coerce(value, like):
    if isinstance(like, bool):
        return value in ("1", "true", "True", "yes")
    return type(like)(value)


def resolve_config(args, defaults):
    """Merge defaults <- config file <- explicit flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        fromfile = _load_config_file(args.config)
        for k, v in fromfile.items():
            if k not in cfg:
                raise ValidationError(f"unknown config key {k!r}")
            cfg[k] = _coerce(v, cfg[k])
    for k in cfg:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def cache_dir(args):
    if getattr(args, "cache_dir", None):
        return args.cache_dir
    return os.environ.get("MAGWALK_CACHE_DIR",
                          os.path.join(os.path.expanduser("~"), ".cache", "magwalk"))


def cache_lookup(cdir, key):
    """Return the cached manifest for `key`, or None on miss/corruption."""
    entry = os.path.join(cdir, key)
    manifest_path = os.path.join(entry, "manifest.json")
    if not os.path.isfile(manifest_path):
        return None
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        for name, digest in manifest["files"].items():
            if file_sha256(os.path.join(entry, name)) != digest:
                raise IOError(f"checksum mismatch for {name}")
        return manifest
    except Exception:
        shutil.rmtree(entry, ignore_errors=True)   # corrupted entry: invalidate
        return None


def cache_store(cdir, key, outdir, files, manifest):
    entry = os.path.join(cdir, key)
    os.makedirs(cdir, exist_ok=True)
    tmp = tempfile.mkdtemp(dir=cdir)
    try:
        for name in files:
            shutil.copy2(os.path.join(outdir, name), os.path.join(tmp, name))
        with open(os.path.join(tmp, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
        shutil.rmtree(entry, ignore_errors=True)
        os.replace(tmp, entry)
    except Exception:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def run_cached(args, subcommand, cfg, produce):
    """Produce output files under the cache discipline.

    `produce(outdir) -> list of file names`; identical configs are served
    from the cache byte-for-byte unless --no-cache is given.
    """
    outdir = cfg["output"]
    os.makedirs(outdir, exist_ok=True)
    key_cfg = {k: v for k, v in cfg.items() if k != "output"}
    key_cfg["subcommand"] = subcommand
    key_cfg["version"] = __version__
    key = config_hash(key_cfg)
    cdir = cache_dir(args)
    use_cache = not getattr(args, "no_cache", False)
    if use_cache:
        manifest = cache_lookup(cdir, key)
        if manifest is not None:
            for name in manifest["files"]:
                shutil.copy2(os.path.join(cdir, key, name),
                             os.path.join(outdir, name))
            write_json(os.path.join(outdir, "manifest.json"), manifest)
            print(f"cache hit {key[:12]}; {len(manifest['files'])} file(s) restored")
            return
    t0 = time.time()
    files = produce(outdir)
    manifest = {
        "config_hash": key,
        "config": key_cfg,
        "version": __version__,
        "files": {name: file_sha256(os.path.join(outdir, name)) for name in files},
        "wall_time_s": round(time.time() - t0, 3),
    }
    write_json(os.path.join(outdir, "manifest.json"), manifest)
    if use_cache:
        cache_store(cdir, key, outdir, files, manifest)
    print(f"wrote {len(files)} file(s) to {outdir} [{manifest['wall_time_s']}s]")


def parse_flux(text):
    if "/" in str(text):
        num, den = str(text).split("/")
        return int(num), int(den)
    raise ValidationError(f"flux must be given as p/q, got {text!r}")


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def cmd_bands(args):
    cfg = resolve_config(args, dict(p=1, q=3, grid=32, seed=0, output="out"))
    if cfg["q"] < 1:
        raise ValidationError(f"invalid q={cfg['q']}")

    def produce(outdir):
        bs = band_structure(cfg["p"], cfg["q"], cfg["grid"], cfg["grid"],
                            store_vectors=False)
        E = bs.floquet_energies()
        rows = []
        for i, kx in enumerate(bs.kxs):
            for j, ky in enumerate(bs.kys):
                rows.append([float(kx), float(ky)] + [float(e) for e in np.sort(E[i, j])])
        header = ["kx", "ky"] + [f"E{n+1}" for n in range(bs.n_bands)]
        write_csv(os.path.join(outdir, "bands.csv"), header, rows)
        table = gap_table(bs)
        write_json(os.path.join(outdir, "gaps.json"), {
            "gaps": [{"midgap": g.midgap, "width": g.width} for g in table],
        })
        return ["bands.csv", "gaps.json"]

    run_cached(args, "bands", cfg, produce)


def selftest_bands():
    bs = band_structure(0, 1, 16, 16, store_vectors=False)
    E = bs.floquet_energies()
    assert E.shape[-1] == 2
    bs3 = band_structure(1, 3, 12, 12, store_vectors=False)
    assert bs3.n_bands == 6
    E3 = np.sort(bs3.floquet_energies().ravel())
    sym = np.sort(-E3)
    assert np.abs(np.sort(np.mod(E3 + np.pi, 2 * np.pi))
                  - np.sort(np.mod(-E3 + np.pi, 2 * np.pi))).max() < 1e-10
    print("bands selftest ok")


def cmd_butterfly(args):
    cfg = resolve_config(args, dict(q_max=8, k_samples=8, seed=0, output="out"))
    if cfg["q_max"] < 2:
        raise ValidationError("q_max must be >= 2")

    def produce(outdir):
        from concurrent.futures import ThreadPoolExecutor
        from fractions import Fraction

        from .lattice import reduced_fractions

        fracs = [f for f in reduced_fractions(cfg["q_max"]) if f != 1]
        threads = max(1, getattr(args, "threads", 1) or 1)

        def column(frac):
            from .spectra import band_structure

            bs = band_structure(frac.numerator, frac.denominator,
                                cfg["k_samples"], cfg["k_samples"],
                                store_vectors=False)
            return np.sort(bs.floquet_energies().ravel())

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                columns = list(pool.map(column, fracs))   # ordered, deterministic
        else:
            columns = [column(f) for f in fracs]
        rows = []
        for frac, samples in zip(fracs, columns):
            for e in samples:
                rows.append([frac.numerator, frac.denominator,
                             float(frac), float(e)])
        write_csv(os.path.join(outdir, "butterfly.csv"),
                  ["p", "q", "phi", "E"], rows)
        return ["butterfly.csv"]

    run_cached(args, "butterfly", cfg, produce)


def selftest_butterfly():
    data = butterfly(3, 6)
    fr = [float(f) for f in data.fluxes()]
    assert 1 / 3 in fr and 1 / 2 in fr
    from fractions import Fraction

    col = dict(data.entries)[Fraction(1, 3)]
    bs = band_structure(1, 3, 6, 6, store_vectors=False)
    ref = np.sort(bs.floquet_energies().ravel())
    assert np.abs(np.sort(col) - ref).max() < 1e-10
    print("butterfly selftest ok")


def cmd_chern(args):
    cfg = resolve_config(args, dict(p=1, q=3, grid=32, seed=0, output="out"))

    def produce(outdir):
        bs = band_structure(cfg["p"], cfg["q"], cfg["grid"], cfg["grid"])
        try:
            values = chern_spectrum(bs)
        except QuantizationError as exc:
            raise QualityError(str(exc))
        payload = {
            "phi": f"{cfg['p']}/{cfg['q']}",
            "groups": [{"bands": list(grp), "chern": res.value,
                        "residual": res.residual} for grp, res in values.items()],
            "sum": int(sum(res.value for res in values.values())),
        }
        write_json(os.path.join(outdir, "chern.json"), payload)
        return ["chern.json"]

    run_cached(args, "chern", cfg, produce)


def selftest_chern():
    bs = band_structure(1, 3, 16, 16)
    values = chern_spectrum(bs)
    assert sum(res.value for res in values.values()) == 0
    print("chern selftest ok")


def cmd_rlbl(args):
    cfg = resolve_config(args, dict(p=1, q=3, s=15, e_tilde=0.0,
                                    all_gaps=True, seed=0, output="out"))
    if getattr(args, "e_tilde", None) is not None and \
            getattr(args, "all_gaps", None) is None:
        cfg["all_gaps"] = False

    def produce(outdir):
        try:
            if cfg["all_gaps"]:
                res = rlbl_spectrum(cfg["p"], cfg["q"], cfg["s"])
                entries = [{"midgap": float(e), "R": r.value,
                            "raw_flow": r.raw_flow,
                            "residual": abs(r.raw_flow - r.value)}
                           for e, r in sorted(res.items())]
            else:
                r = rlbl_invariant(cfg["p"], cfg["q"], cfg["e_tilde"], cfg["s"])
                entries = [{"midgap": cfg["e_tilde"], "R": r.value,
                            "raw_flow": r.raw_flow,
                            "residual": abs(r.raw_flow - r.value)}]
        except NotInGapError as exc:
            raise ValidationError(str(exc))
        except QuantizationError as exc:
            raise QualityError(str(exc))
        write_json(os.path.join(outdir, "invariants.json"),
                   {"phi": f"{cfg['p']}/{cfg['q']}", "s": cfg["s"],
                    "gaps": entries})
        return ["invariants.json"]

    run_cached(args, "rlbl", cfg, produce)


def selftest_rlbl():
    from .operators import bloch_step_operator, spectral_flow_operator

    W15 = spectral_flow_operator(1, 3, 0.0, 0.0, 0.1, 0.1, 15)
    assert unitarity_defect(W15) < 1e-12
    # beta = 0: spectrum is the s-fold momentum folding of the unmodified walk
    s, q, kx, ky = 3, 3, 0.07, 0.1
    E_mod = np.sort(quasienergies(spectral_flow_operator(1, q, 0.0, 0.0, kx, ky, s)))
    folded = np.sort(np.concatenate([
        quasienergies(bloch_step_operator(1, q, kx + 2 * np.pi * n / (s * q), ky).matrix)
        for n in range(s)
    ]))
    assert np.abs(E_mod - folded).max() < 1e-10
    print("rlbl selftest ok")


def cmd_stripe(args):
    cfg = resolve_config(args, dict(p=1, q=3, Lx=60, x_left=15, x_right=45,
                                    ky_grid=256, window=5, realistic=True,
                                    NA=0.92, shift=0.5, seed=0, output="out"))

    def produce(outdir):
        phi = cfg["p"] / cfg["q"]
        stripe = StripeFlux(phi, -phi, cfg["x_left"], cfg["x_right"])
        flux_cols = stripe.column_flux(cfg["Lx"])
        if cfg["realistic"]:
            from .realism import blurred_profile_from_flux

            phases = blurred_profile_from_flux(flux_cols, cfg["shift"], cfg["NA"])
            ribbon = ribbon_spectrum(phases=phases,
                                     walls=(cfg["x_left"], cfg["x_right"]),
                                     ky_grid=cfg["ky_grid"],
                                     edge_window=cfg["window"])
        else:
            ribbon = ribbon_spectrum(flux_profile=flux_cols,
                                     ky_grid=cfg["ky_grid"],
                                     edge_window=cfg["window"])
        rows = []
        from .operators import wrap_pi

        for j, ky in enumerate(ribbon.kys):
            for n in range(ribbon.energies.shape[1]):
                rows.append([float(ky), float(wrap_pi(ribbon.energies[j, n])),
                             float(ribbon.edge_weight_left[j, n]),
                             float(ribbon.edge_weight_right[j, n])])
        write_csv(os.path.join(outdir, "ribbon.csv"),
                  ["ky", "E", "w_left", "w_right"], rows)
        return ["ribbon.csv"]

    run_cached(args, "stripe", cfg, produce)


def selftest_stripe():
    rib = ribbon_spectrum(flux_profile=np.full(6, 1 / 3), ky_grid=16)
    assert rib.edge_weight_left.max() == 0.0   # no walls detected
    print("stripe selftest ok")


def cmd_evolve(args):
    cfg = resolve_config(args, dict(preset="quarter_circle", phi_out_p=1,
                                    phi_out_q=3, radius=40, L=120, steps=400,
                                    record=10, seed=0, output="out"))

    def produce(outdir):
        from .dynamics import SpinorField, edge_transport_experiment

        geo = LatticeGeometry(cfg["L"], cfg["L"])
        phi = cfg["phi_out_p"] / cfg["phi_out_q"]
        if cfg["preset"] != "quarter_circle":
            raise ValidationError(f"unknown preset {cfg['preset']!r}")
        center = (cfg["L"] // 3, cfg["L"] // 3)
        preset = QuarterCircleFlux(phi, -phi, cfg["radius"], center)
        start = (int(center[0] + cfg["radius"]), int(center[1]) + 1)
        res = edge_transport_experiment(preset, geo, start, cfg["steps"],
                                        cfg["record"])
        files = []
        for i, (step, prob) in enumerate(zip(res.result.steps, res.result.maps)):
            name = f"frame_{int(step):05d}.pgm"
            write_pgm(os.path.join(outdir, name), prob)
            files.append(name)
        rows = [[int(s), float(x), float(y)]
                for s, (x, y) in zip(res.result.steps, res.result.analysis.track)]
        write_csv(os.path.join(outdir, "trajectory.csv"), ["step", "x", "y"], rows)
        files.append("trajectory.csv")
        rows = [[int(s), float(f)] for s, f in
                zip(res.result.steps, res.boundary_fraction)]
        write_csv(os.path.join(outdir, "boundary_fraction.csv"),
                  ["step", "fraction"], rows)
        files.append("boundary_fraction.csv")
        return files

    run_cached(args, "evolve", cfg, produce)


def selftest_evolve():
    from .dynamics import SpinorField, evolve

    geo = LatticeGeometry(12, 12)
    gauge = GaugeField.zero(geo)
    st = SpinorField.point_source(geo, (6, 6), (1, 0))
    res = evolve(st, gauge, 10, record_every=5)
    assert abs(st.norm() - 1.0) < 1e-12
    X, Y = np.meshgrid(np.arange(12), np.arange(12), indexing="ij")
    prob = st.probability()
    assert prob[(X + Y) % 2 == 1].sum() < 1e-24   # sublattice conserved
    print("evolve selftest ok")


def cmd_edge(args):
    # alias of evolve with the quarter-circle preset and a control run
    cfg = resolve_config(args, dict(phi_out_p=1, phi_out_q=3, radius=40,
                                    L=120, steps=400, record=10,
                                    control=False, seed=0, output="out"))

    def produce(outdir):
        from .dynamics import SpinorField, edge_transport_experiment, evolve

        geo = LatticeGeometry(cfg["L"], cfg["L"])
        phi = cfg["phi_out_p"] / cfg["phi_out_q"]
        center = (cfg["L"] // 3, cfg["L"] // 3)
        preset = QuarterCircleFlux(phi, -phi, cfg["radius"], center)
        start = (int(center[0] + cfg["radius"]), int(center[1]) + 1)
        files = []
        if cfg["control"]:
            uni = UniformFlux(phi)
            st = SpinorField.point_source(geo, start)
            res = evolve(st, uni.gauge(geo), cfg["steps"], cfg["record"],
                         boundary_distance=preset.boundary_distance(geo))
            fr = res.analysis.boundary_fraction
            steps = res.steps
        else:
            res = edge_transport_experiment(preset, geo, start, cfg["steps"],
                                            cfg["record"])
            fr = res.boundary_fraction
            steps = res.result.steps
        rows = [[int(s), float(f)] for s, f in zip(steps, fr)]
        write_csv(os.path.join(outdir, "boundary_fraction.csv"),
                  ["step", "fraction"], rows)
        files.append("boundary_fraction.csv")
        return files

    run_cached(args, "edge", cfg, produce)


def cmd_realism_gap_scan(args):
    cfg = resolve_config(args, dict(p=1, q=3, NA=0.92, shifts=20,
                                    lam_ratio=1.43, seed=0, output="out"))

    def produce(outdir):
        from .realism import gap_width_scan

        shifts = np.linspace(0.0, 1.0, cfg["shifts"], endpoint=False)
        rows = gap_width_scan(cfg["p"] / cfg["q"], (1, 2, 4), cfg["NA"], shifts,
                              cfg["lam_ratio"])
        write_csv(os.path.join(outdir, "gap_scan.csv"),
                  ["m", "shift", "gap_width"], rows)
        return ["gap_scan.csv"]

    run_cached(args, "realism-gap-scan", cfg, produce)


def selftest_realism_gap_scan():
    from .realism import ideal_landau_phases, sawtooth_profile

    prof = sawtooth_profile(1 / 3, 1, 0.5, None, length=3)
    assert np.abs(prof.phases - ideal_landau_phases(1 / 3, 3)).max() < 1e-12
    print("realism-gap-scan selftest ok")


def cmd_realism_pex(args):
    cfg = resolve_config(args, dict(phi_p=1, phi_q=3, v0=850.0, tau_min=0.05,
                                    tau_max=2.0, tau_steps=16, numeric=True,
                                    seed=0, output="out"))

    def produce(outdir):
        from .realism import p_ex_perturbative, p_ex_splitstep

        phi = cfg["phi_p"] / cfg["phi_q"]
        taus = np.linspace(cfg["tau_min"], cfg["tau_max"], cfg["tau_steps"])
        rows = []
        for t in taus:
            pp = float(p_ex_perturbative(phi, cfg["v0"], t))
            if cfg["numeric"]:
                pn = p_ex_splitstep(phi, cfg["v0"], t)
                rows.append([float(t), pp, pn])
            else:
                rows.append([float(t), pp, ""])
        write_csv(os.path.join(outdir, "pex.csv"),
                  ["tau_over_tauHO", "p_perturbative", "p_numeric"], rows)
        return ["pex.csv"]

    run_cached(args, "realism-pex", cfg, produce)


def selftest_realism_pex():
    from .realism import p_ex_perturbative

    assert p_ex_perturbative(1 / 3, 850.0, 1.0) == 0.0
    p1 = p_ex_perturbative(1 / 3, 850.0, 0.0)
    p2 = p_ex_perturbative(1 / 3, 1700.0, 0.0)
    assert abs(p2 / p1 - 1 / np.sqrt(2)) < 1e-12
    from .realism import _splitstep_run

    assert _splitstep_run(0.0, 850.0, 0.5, 512, 5, 400) < 1e-12
    print("realism-pex selftest ok")


def cmd_symmetry(args):
    cfg = resolve_config(args, dict(q_max=10, seed=20190411, output="out"))

    def produce(outdir):
        from .symmetry import run_symmetry_suite

        reports = run_symmetry_suite(range(1, cfg["q_max"] + 1), seed=cfg["seed"])
        payload = [{"check": name, "residual": r.residual, "passed": r.passed}
                   for name, r in reports]
        write_json(os.path.join(outdir, "symmetry.json"), payload)
        if not all(r.passed for _, r in reports):
            raise QualityError("a symmetry identity exceeded its tolerance")
        return ["symmetry.json"]

    run_cached(args, "symmetry", cfg, produce)


def selftest_symmetry():
    from .symmetry import check_chiral, check_particle_hole

    assert check_chiral(0, 1).passed
    assert check_particle_hole(1, 3).passed
    print("symmetry selftest ok")


SELFTESTS = {
    "bands": selftest_bands,
    "butterfly": selftest_butterfly,
    "chern": selftest_chern,
    "rlbl": selftest_rlbl,
    "stripe": selftest_stripe,
    "evolve": selftest_evolve,
    "edge": selftest_evolve,
    "realism-gap-scan": selftest_realism_gap_scan,
    "realism-pex": selftest_realism_pex,
    "symmetry": selftest_symmetry,
}


def _add_common(sp):
    sp.add_argument("--config", help="key=value config file (flags override)")
    sp.add_argument("--output", help="output directory")
    sp.add_argument("--no-cache", action="store_true",
                    help="recompute even on a cache hit")
    sp.add_argument("--cache-dir", help="cache directory "
                                        "(default $MAGWALK_CACHE_DIR)")
    sp.add_argument("--threads", type=int, default=1,
                    help="parallel width for k-sweeps")
    sp.add_argument("--selftest", action="store_true",
                    help="run the subcommand's smoke checks and exit")
    sp.add_argument("--seed", type=int, help="random seed recorded in the config")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="magwalk",
        description="Magnetic discrete-time quantum walks: spectra, "
                    "invariants, transport, and imprint realism.",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("bands", help="band structure over the magnetic BZ")
    sp.add_argument("--p", type=int)
    sp.add_argument("--q", type=int)
    sp.add_argument("--grid", type=int)
    _add_common(sp)
    sp.set_defaults(func=cmd_bands)

    sp = sub.add_parser("butterfly", help="quasienergy spectrum vs flux")
    sp.add_argument("--q-max", dest="q_max", type=int)
    sp.add_argument("--k-samples", dest="k_samples", type=int)
    _add_common(sp)
    sp.set_defaults(func=cmd_butterfly)

    sp = sub.add_parser("chern", help="link-variable Chern numbers")
    sp.add_argument("--p", type=int)
    sp.add_argument("--q", type=int)
    sp.add_argument("--grid", type=int)
    _add_common(sp)
    sp.set_defaults(func=cmd_chern)

    sp = sub.add_parser("rlbl", help="spectral-flow gap invariants")
    sp.add_argument("--p", type=int)
    sp.add_argument("--q", type=int)
    sp.add_argument("--s", type=int)
    sp.add_argument("--e-tilde", dest="e_tilde", type=float)
    sp.add_argument("--all-gaps", dest="all_gaps", action="store_const", const=True)
    _add_common(sp)
    sp.set_defaults(func=cmd_rlbl)

    sp = sub.add_parser("stripe", help="ribbon spectrum of a flux stripe")
    for name, typ in (("p", int), ("q", int), ("Lx", int), ("x-left", int),
                      ("x-right", int), ("ky-grid", int), ("window", int),
                      ("NA", float), ("shift", float)):
        sp.add_argument(f"--{name}", dest=name.replace("-", "_"), type=typ)
    sp.add_argument("--ideal", dest="realistic", action="store_const", const=False)
    _add_common(sp)
    sp.set_defaults(func=cmd_stripe)

    sp = sub.add_parser("evolve", help="real-space evolution with PGM frames")
    for name, typ in (("preset", str), ("radius", int), ("L", int),
                      ("steps", int), ("record", int)):
        sp.add_argument(f"--{name}", dest=name, type=typ)
    _add_common(sp)
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("edge", help="edge-transport boundary fractions")
    for name, typ in (("radius", int), ("L", int), ("steps", int),
                      ("record", int)):
        sp.add_argument(f"--{name}", dest=name, type=typ)
    sp.add_argument("--control", action="store_const", const=True,
                    help="uniform-flux control run")
    _add_common(sp)
    sp.set_defaults(func=cmd_edge)

    sp = sub.add_parser("realism-gap-scan", help="gap width vs sawtooth shift")
    sp.add_argument("--p", type=int)
    sp.add_argument("--q", type=int)
    sp.add_argument("--NA", dest="NA", type=float)
    sp.add_argument("--shifts", type=int)
    sp.add_argument("--lam-ratio", dest="lam_ratio", type=float)
    _add_common(sp)
    sp.set_defaults(func=cmd_realism_gap_scan)

    sp = sub.add_parser("realism-pex", help="motional-excitation budget")
    for name, typ in (("phi-p", int), ("phi-q", int), ("v0", float),
                      ("tau-min", float), ("tau-max", float),
                      ("tau-steps", int)):
        sp.add_argument(f"--{name}", dest=name.replace("-", "_"), type=typ)
    sp.add_argument("--no-numeric", dest="numeric", action="store_const",
                    const=False)
    _add_common(sp)
    sp.set_defaults(func=cmd_realism_pex)

    sp = sub.add_parser("symmetry", help="symmetry identity suite")
    sp.add_argument("--q-max", dest="q_max", type=int)
    _add_common(sp)
    sp.set_defaults(func=cmd_symmetry)

    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if getattr(args, "selftest", False):
            SELFTESTS[args.subcommand]()
            return EXIT_OK
        args.func(args)
        return EXIT_OK
    except (ValidationError, IncommensurateFluxError, NotInGapError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (QualityError, QuantizationError) as exc:
        print(f"numerical-quality failure: {exc}", file=sys.stderr)
        return EXIT_QUALITY


if __name__ == "__main__":
    sys.exit(main())
