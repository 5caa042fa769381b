"""Command-line surface wiring the pipeline.

Subcommands: features, distances, mle, sample, diagnose, summarize, synth.
Exit codes: 0 success, 1 usage error, 2 data error.  Every run writes a
``run_manifest.json`` into its output directory recording the resolved
configuration and seed, so any run can be reproduced exactly.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import pathlib
import sys
import time

import numpy as np

from . import audio, diagnostics, mle, summarize, synth
from .core import Hyperparams, normalize_tensor, read_tensor, validate_tensor, write_tensor
from .core import DistanceTensor, ModelState, pair_indices
from .metrics import CurveSet, build_tensor, hellinger
from .sampler import ChainConfig, empirical_bayes_lambda, load_chain, run_chain, save_chain

DEFAULT_CONFIG = {
    "audio": {
        "freq_res": audio.DEFAULT_FREQ_RES,
        "time_res": audio.DEFAULT_TIME_RES,
        "grid": audio.DEFAULT_GRID,
        "ref_pitch": audio.DEFAULT_REF_PITCH,
    },
    "chain": {
        "iters": 30000,
        "burnin": 15000,
        "thin": 1,
        "step_x": 0.1,
        "step_log_psi": 0.4,
        "step_log_gamma": 0.4,
        "adapt": True,
    },
    "priors": {"a1": 0.01, "b1": 0.01, "a2": 0.01, "b2": 0.01, "alpha": 1.0, "beta": 1.0},
    "floor": 1e-6,
    "hpd_mass": 0.95,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so dispatch controls exit codes."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _merged_config(path: str | None, overrides: dict) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            user = json.load(fh)
        for section, values in user.items():
            if isinstance(values, dict):
                cfg.setdefault(section, {}).update(values)
            else:
                cfg[section] = values
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        if key:
            cfg[section][key] = value
        else:
            cfg[section] = value
    return cfg


def _write_manifest(out_dir: pathlib.Path, command: str, argv, cfg: dict, seed) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": cfg,
        "seed": seed,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    with open(out_dir / "run_manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_features(args, argv) -> int:
    cfg = _merged_config(
        args.config,
        {
            "audio.freq_res": args.freq_res,
            "audio.time_res": args.time_res,
            "audio.grid": args.grid,
            "audio.ref_pitch": args.ref_pitch,
        },
    )["audio"]
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reference = audio.read_chromagram_csv(args.reference)

    def one(wav_path: str):
        sig, rate = audio.load_wav(wav_path)
        curves = audio.extract_curves(
            sig,
            rate,
            reference,
            freq_res=cfg["freq_res"],
            time_res=cfg["time_res"],
            grid_size=cfg["grid"],
            ref_pitch=cfg["ref_pitch"],
        )
        stem = pathlib.Path(wav_path).stem
        for metric, curve in curves.items():
            audio.write_curve_csv(curve, out / f"{stem}.{metric}.csv")
        return stem

    if args.threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.threads) as pool:
            list(pool.map(one, args.wav))
    else:
        for wav_path in args.wav:
            one(wav_path)
    _write_manifest(out, "features", argv, {"audio": cfg}, None)
    return 0


def _read_curves_manifest(path) -> tuple[list[str], list[str], dict]:
    """Manifest CSV ``entity,replicate,path`` -> sorted names and path lookup."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "entity,replicate,path":
            raise ValueError(f"expected header 'entity,replicate,path', got {header!r}")
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"line {ln}: expected 3 fields")
            rows.append(tuple(parts))
    entities = sorted({r[0] for r in rows})
    replicates = sorted({r[1] for r in rows})
    lookup = {(r[0], r[1]): r[2] for r in rows}
    for e in entities:
        for p in replicates:
            if (e, p) not in lookup:
                raise ValueError(f"manifest is not rectangular: missing ({e}, {p})")
    return entities, replicates, lookup


def _cmd_distances(args, argv) -> int:
    cfg = _merged_config(args.config, {"floor": args.floor})
    floor = cfg["floor"]
    if args.pair:
        a = audio.read_curve_csv(args.pair[0])
        b = audio.read_curve_csv(args.pair[1])
        value = max(hellinger(a, b), floor)
        print("%.16e" % value)
        if args.out:
            out = pathlib.Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "pair_distance.txt", "w", encoding="utf-8") as fh:
                fh.write("%.16e\n" % value)
            _write_manifest(out, "distances", argv, {"floor": floor}, None)
        return 0
    if not args.manifest or not args.out:
        raise UsageError("distances: either --pair or both --manifest and --out are required")
    entities, replicates, lookup = _read_curves_manifest(args.manifest)
    curves = []
    length = None
    for e in entities:
        row = []
        for p in replicates:
            c = audio.read_curve_csv(lookup[(e, p)])
            if length is None:
                length = c.size
            elif c.size != length:
                raise ValueError(f"curve length mismatch for ({e}, {p})")
            row.append(c)
        curves.append(row)
    tensor = build_tensor(CurveSet(np.asarray(curves)), floor=floor)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(tensor, out / "tensor.csv")
    with open(out / "entities.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"entities": entities, "replicates": replicates}, fh, indent=2)
        fh.write("\n")
    _write_manifest(out, "distances", argv, {"floor": floor}, None)
    return 0


def _load_valid_tensor(path) -> DistanceTensor:
    tensor = read_tensor(path)
    problems = validate_tensor(tensor)
    if problems:
        preview = "; ".join(problems[:5])
        raise ValueError(f"tensor fails validation ({len(problems)} issue(s)): {preview}")
    return tensor


def _cmd_mle(args, argv) -> int:
    tensor = _load_valid_tensor(args.tensor)
    est = mle.fit_mle(tensor, tol=args.tol, max_iter=args.max_iter)
    iu, ju = pair_indices(tensor.n_entities)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "n_entities": tensor.n_entities,
        "delta": [[int(i), int(j), float(v)] for i, j, v in zip(iu, ju, est.delta_hat)],
        "tau": [float(v) for v in est.tau_hat],
        "psi": float(est.psi_hat),
        "converged": bool(est.converged),
        "iterations": int(est.iterations),
    }
    with open(out / "mle.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    _write_manifest(out, "mle", argv, {"tol": args.tol, "max_iter": args.max_iter}, None)
    return 0


def _hyperparams(tensor: DistanceTensor, priors: dict) -> Hyperparams:
    return Hyperparams(
        lambda_diag=empirical_bayes_lambda(tensor),
        a1=priors["a1"],
        b1=priors["b1"],
        a2=priors["a2"],
        b2=priors["b2"],
        alpha=priors["alpha"],
        beta=priors["beta"],
    )


def _cmd_sample(args, argv) -> int:
    cfg = _merged_config(
        args.config,
        {
            "chain.iters": args.iters,
            "chain.burnin": args.burnin,
            "chain.thin": args.thin,
            "chain.step_x": args.step_x,
            "chain.step_log_psi": args.step_log_psi,
            "chain.step_log_gamma": args.step_log_gamma,
        },
    )
    tensor = _load_valid_tensor(args.tensor)
    chain_cfg = ChainConfig(
        n_iter=cfg["chain"]["iters"],
        n_burnin=cfg["chain"]["burnin"],
        thin=cfg["chain"]["thin"],
        rng_seed=args.seed,
        step_x=cfg["chain"]["step_x"],
        step_log_psi=cfg["chain"]["step_log_psi"],
        step_log_gamma=cfg["chain"]["step_log_gamma"],
        adapt=cfg["chain"]["adapt"],
    )
    h = _hyperparams(tensor, cfg["priors"])
    chain = run_chain(tensor, h, chain_cfg)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_chain(chain, out / "chain.csv", out / "chain_schema.json")
    _write_manifest(out, "sample", argv, cfg, args.seed)
    return 0


def _cmd_diagnose(args, argv) -> int:
    cfg = _merged_config(args.config, {"hpd_mass": args.hpd_mass})
    tensor = _load_valid_tensor(args.tensor)
    chain = load_chain(args.chain, args.schema)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    schema = chain.schema()
    names = args.params if args.params else sorted(schema, key=schema.get)
    mat = chain.to_matrix()
    with open(out / "ess_table.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("parameter,ess\n")
        for name in names:
            value = diagnostics.ess(mat[:, schema[name]])
            fh.write(f"{name},{'%.6f' % value}\n")

    traces = out / "traces"
    traces.mkdir(exist_ok=True)
    for name in names:
        safe = name.replace("[", "_").replace("]", "").replace(",", "_")
        diagnostics.trace_export(chain, [name], traces / f"{safe}.csv")

    mass = cfg["hpd_mass"]
    rng = np.random.default_rng([args.seed, 1])
    pw = diagnostics.ppc_pairwise(tensor, chain, hpd_mass=mass, rng=rng)
    with open(out / "ppc_pairwise.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,j,p,r_mean,hpd_lo,hpd_hi,contains_zero\n")
        for a in range(pw.ratios.shape[0]):
            for p in range(pw.ratios.shape[1]):
                lo, hi = pw.intervals[a, p]
                fh.write(
                    f"{pw.pair_i[a]},{pw.pair_j[a]},{p},"
                    f"{'%.16e' % pw.ratios[a, p].mean()},{'%.16e' % lo},{'%.16e' % hi},"
                    f"{int(pw.contains_zero[a, p])}\n"
                )
    rng = np.random.default_rng([args.seed, 2])
    hier = diagnostics.ppc_hierarchical(tensor, chain, hpd_mass=mass, rng=rng)
    with open(out / "ppc_hierarchical.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,j,rbar_mean,hpd_lo,hpd_hi,contains_zero\n")
        for a in range(hier.averaged.shape[0]):
            lo, hi = hier.intervals[a]
            fh.write(
                f"{hier.pair_i[a]},{hier.pair_j[a]},"
                f"{'%.16e' % hier.averaged[a].mean()},{'%.16e' % lo},{'%.16e' % hi},"
                f"{int(hier.contains_zero[a])}\n"
            )
    print(f"ppc pairwise coverage: {pw.coverage:.4f}")
    print(f"ppc hierarchical coverage: {hier.coverage:.4f}")
    _write_manifest(out, "diagnose", argv, cfg, args.seed)
    return 0


def _cmd_summarize(args, argv) -> int:
    chain = load_chain(args.chain, args.schema)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mean_delta = summarize.posterior_mean_delta(chain)
    summarize.write_delta_mean_csv(mean_delta, out / "delta_mean.csv")
    labels = None
    if args.labels:
        with open(args.labels, "r", encoding="utf-8") as fh:
            labels = [line.strip() for line in fh if line.strip()]
    dendro = summarize.agglomerate(
        mean_delta + mean_delta.T, linkage=args.linkage, labels=labels
    )
    with open(out / "dendrogram.newick", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dendro.to_newick() + "\n")
    aligned = summarize.procrustes_align(chain)
    summarize.write_aligned_draws_csv(aligned, out / "aligned_X.csv")
    _write_manifest(out, "summarize", argv, {"linkage": args.linkage}, None)
    return 0


def _cmd_synth(args, argv) -> int:
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    if args.what == "tensor":
        n, m = args.entities, args.replicates
        x = rng.standard_normal((n, n - 1)) * 0.5
        iu, ju = pair_indices(n)
        delta = np.linalg.norm(x[iu] - x[ju], axis=1)
        tau = np.exp(rng.normal(0.0, args.tau_spread, m))
        tau /= np.exp(np.mean(np.log(tau)))
        state = ModelState(X=x, delta=delta, tau=tau, psi=args.psi, gamma_shrink=1.0)
        tensor = synth.generate_tensor(state, m, rng)
        tensor = normalize_tensor(tensor, floor=1e-9)
        write_tensor(tensor, out / "tensor.csv")
        truth = {
            "n_entities": n,
            "n_replicates": m,
            "psi": args.psi,
            "delta": [[int(i), int(j), float(v)] for i, j, v in zip(iu, ju, delta)],
            "tau": [float(v) for v in tau],
            "X": x.tolist(),
            "note": "tensor.csv is rescaled to max 1; delta/tau here are pre-scaling",
        }
        with open(out / "truth.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(truth, fh, indent=2)
            fh.write("\n")
        _write_manifest(out, "synth", argv, {"what": "tensor"}, args.seed)
        return 0

    # synth audio
    tempo = [float(v) for v in args.tempo_profile.split(",")]
    gain = [float(v) for v in args.gain_profile.split(",")]
    base = synth.synth_melody(args.sample_rate, args.notes, args.note_duration, rng)
    warped, positions = synth.generate_warped_audio(base, args.sample_rate, tempo, gain)
    audio.save_wav(out / "base.wav", base, args.sample_rate)
    audio.save_wav(out / "warped.wav", warped, args.sample_rate)
    spec = audio.stft(base, args.sample_rate, freq_res=args.freq_res, time_res=args.time_res)
    audio.write_chromagram_csv(audio.chromagram(spec), out / "base_chroma.csv")
    truth = {
        "sample_rate": args.sample_rate,
        "tempo_profile": tempo,
        "gain_profile": gain,
        "n_output_samples": len(warped),
        "base_samples": len(base),
    }
    with open(out / "truth.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(truth, fh, indent=2)
        fh.write("\n")
    _write_manifest(out, "synth", argv, {"what": "audio"}, args.seed)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="hmds", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("features", help="extract tempo/dynamics/timbre curves from WAV files")
    p.add_argument("wav", nargs="+", help="input WAV files (16-bit PCM or float)")
    p.add_argument("--reference", required=True, help="reference chromagram CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--freq-res", dest="freq_res", type=float)
    p.add_argument("--time-res", dest="time_res", type=float)
    p.add_argument("--grid", type=int)
    p.add_argument("--ref-pitch", dest="ref_pitch", type=float)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("distances", help="build a distance tensor from curve files")
    p.add_argument("--manifest", help="CSV 'entity,replicate,path' listing curve files")
    p.add_argument("--pair", nargs=2, metavar="CURVE", help="print the distance of two curves")
    p.add_argument("--out")
    p.add_argument("--config")
    p.add_argument("--floor", type=float)
    p.set_defaults(func=_cmd_distances)

    p = sub.add_parser("mle", help="maximum likelihood fit of delta, tau, psi")
    p.add_argument("--tensor", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=1000)
    p.set_defaults(func=_cmd_mle)

    p = sub.add_parser("sample", help="run the MCMC sampler on a distance tensor")
    p.add_argument("--tensor", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--iters", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step-x", dest="step_x", type=float)
    p.add_argument("--step-log-psi", dest="step_log_psi", type=float)
    p.add_argument("--step-log-gamma", dest="step_log_gamma", type=float)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("diagnose", help="ESS table, traces, posterior-predictive checks")
    p.add_argument("--tensor", required=True)
    p.add_argument("--chain", required=True)
    p.add_argument("--schema", help="chain schema JSON (default: <chain>.schema.json)")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--hpd-mass", dest="hpd_mass", type=float)
    p.add_argument("--params", nargs="*", help="parameter names (default: all)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("summarize", help="posterior mean delta, dendrogram, aligned embeddings")
    p.add_argument("--chain", required=True)
    p.add_argument("--schema")
    p.add_argument("--out", required=True)
    p.add_argument("--linkage", choices=summarize.LINKAGES, default="average")
    p.add_argument("--labels", help="text file with one entity label per line")
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("synth", help="synthetic ground-truth data generators")
    p.add_argument("what", choices=["tensor", "audio"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--entities", type=int, default=5)
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--psi", type=float, default=10.0)
    p.add_argument("--tau-spread", dest="tau_spread", type=float, default=0.3)
    p.add_argument("--sample-rate", dest="sample_rate", type=int, default=8000)
    p.add_argument("--notes", type=int, default=12)
    p.add_argument("--note-duration", dest="note_duration", type=float, default=0.5)
    p.add_argument("--tempo-profile", dest="tempo_profile", default="2,2")
    p.add_argument("--gain-profile", dest="gain_profile", default="1,1")
    p.add_argument("--freq-res", dest="freq_res", type=float, default=10.0)
    p.add_argument("--time-res", dest="time_res", type=float, default=0.1)
    p.set_defaults(func=_cmd_synth)

    return parser


def dispatch(argv) -> int:
    """Parse and run; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    if not getattr(args, "command", None):
        print(parser.format_usage(), file=sys.stderr)
        return 1
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
