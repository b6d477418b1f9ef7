"""Command-line pipelines.

Every subcommand writes its outputs under ``--out`` together with a manifest
``run.json`` (argv, resolved config, input digests, seed, tool version).
``tracexai rerun run.json --out DIR`` re-executes a manifest.

Parameters resolve as flags > TOML config (``--config``) > environment
(``TRACEXAI_<NAME>``, plus ``JUDGE_ENDPOINT``/``JUDGE_MODEL`` for the judge)
> defaults, and the resolved values are printed to stderr.

Exit codes: 0 ok, 2 usage, 3 data error, 4 transport error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bridge import paradigm_summary, run_bridge
from .errors import DataError, TraceXAIError, TransportError
from .mep import build_agentic_mep, build_global_static_mep, build_static_mep, serialize
from .outcome_stats import stats_report
from .report import FORMATS, beeswarm_json, pdp_csv, render_report, summary_table, to_tables
from .rubric_judge import (
    JudgeConfig,
    aggregate,
    flags_from_jsonl,
    flags_to_jsonl,
    judge_llm_corpus,
    judge_rules,
    matrix_from_ground_truth,
)
from .rubrics import RUBRIC_IDS
from .synth_env import GroundTruth, generate_corpus, replay, replay_config_for, synth_config_from_dict
from .trace_model import parse_trace_corpus, serialize_corpus, serialize_trajectory, validate_trajectory

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_TRANSPORT = 4

MANIFEST = "run.json"
EXT = {"markdown": "md", "csv": "csv", "json": "json"}


class UsageError(Exception):
    pass


# name -> (type, default, help); type "path" is an input file resolved before execution
_TABLES = {
    "synth": {
        "runs": (int, 1000, "number of runs to generate"),
        "seed": (int, 0, "corpus seed"),
    },
    "judge": {
        "traces": ("path", None, "trace corpus (JSONL)"),
        "judge": (str, "rules", "rules or llm"),
        "endpoint": (str, None, "chat-completions URL for the llm judge"),
        "model": (str, None, "judge model name"),
        "temperature": (float, 0.1, "judge sampling temperature"),
        "max_in_flight": (int, 4, "concurrent judge requests"),
        "retry_budget": (int, 3, "retries per request"),
        "timeout": (float, 60.0, "request timeout in seconds"),
    },
    "stats": {
        "traces": ("path", None, "trace corpus (JSONL)"),
        "flags": ("path", None, "flag vectors (JSONL)"),
        "ground_truth": ("path", None, "ground-truth flags + outcomes instead of traces/flags"),
        "format": (str, "all", "markdown, csv, json or all"),
    },
    "static-xai": {
        "data": ("path", None, "labelled CSV with text,label columns; synthetic corpus if absent"),
        "synthetic_docs": (int, 2000, "size of the synthetic corpus"),
        "seed": (int, 0, "seed for data split, synthetic corpus and perturbations"),
        "test_fraction": (float, 0.2, "held-out fraction"),
        "ngram_max": (int, 2, "largest n-gram"),
        "min_df": (int, 5, "minimum document count"),
        "max_df": (float, 0.9, "maximum document fraction"),
        "l2": (float, 1.0, "L2 penalty"),
        "max_iter": (int, 500, "optimizer iteration cap"),
        "tol": (float, 1e-6, "gradient-norm tolerance"),
        "top_k": (int, 20, "features listed in the attribution table"),
        "k": (int, 10, "top-k for stability"),
        "n_perturb": (int, 20, "perturbations per instance"),
        "rate": (float, 0.1, "token dropout rate"),
        "perturbation": (str, "token_dropout", "token_dropout or bootstrap_retrain"),
        "n_instances": (int, 50, "held-out instances scored for stability"),
        "format": (str, "all", "markdown, csv, json or all"),
    },
    "bridge": {
        "traces": ("path", None, "trace corpus (JSONL)"),
        "flags": ("path", None, "flag vectors (JSONL)"),
        "ground_truth": ("path", None, "ground-truth flags + outcomes instead of traces/flags"),
        "l2": (float, 1.0, "L2 penalty"),
        "format": (str, "all", "markdown, csv, json or all"),
    },
    "mep": {
        "paradigm": (str, "agentic", "agentic or static"),
        "traces": ("path", None, "trace corpus (agentic)"),
        "flags": ("path", None, "flag vectors (agentic)"),
        "synth_config": ("path", None, "synthetic fault TOML; enables replay checks (agentic)"),
        "run_id": (str, None, "only this run (agentic)"),
        "model_file": ("path", None, "model.json from static-xai (static)"),
        "tfidf_file": ("path", None, "tfidf.json from static-xai (static)"),
        "stability_file": ("path", None, "stability.json from static-xai (static)"),
        "text": (str, None, "instance text (static)"),
        "top_k": (int, 10, "attributions kept in a static packet"),
    },
    "report": {
        "traces": ("path", None, "trace corpus (JSONL)"),
        "flags": ("path", None, "flag vectors (JSONL)"),
        "ground_truth": ("path", None, "ground-truth flags + outcomes instead of traces/flags"),
        "l2": (float, 1.0, "L2 penalty for the bridge surrogate"),
        "format": (str, "markdown", "markdown, csv or json"),
    },
}
_CHOICES = {
    "judge": ("rules", "llm"),
    "format": FORMATS + ("all",),
    "perturbation": ("token_dropout", "bootstrap_retrain"),
    "paradigm": ("agentic", "static"),
}
_ENV_ALIASES = {"judge": {"endpoint": "JUDGE_ENDPOINT", "model": "JUDGE_MODEL"}}
SUBCOMMANDS = tuple(_TABLES)


# -- config resolution -------------------------------------------------------


def _cast(typ, value, name):
    if value is None:
        return None
    if typ == "path":
        return str(value)
    try:
        if typ is int and (isinstance(value, bool) or (isinstance(value, float) and not value.is_integer())):
            raise ValueError
        return typ(value)
    except (TypeError, ValueError):
        raise UsageError(f"--{name.replace('_', '-')}: cannot interpret {value!r} as {typ.__name__}") from None


def _read_toml(path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from None


def resolve_config(cmd: str, flags: dict, toml_doc: dict | None, env) -> tuple[dict, dict]:
    """Merge parameter layers; returns (config, source per parameter)."""
    toml_doc = toml_doc or {}
    section = toml_doc.get(cmd, {})
    if not isinstance(section, dict):
        raise UsageError(f"config section [{cmd}] must be a table")
    cfg, sources = {}, {}
    for name, (typ, default, _) in _TABLES[cmd].items():
        value, src = default, "default"
        env_key = _ENV_ALIASES.get(cmd, {}).get(name, f"TRACEXAI_{name.upper()}")
        if env.get(env_key) not in (None, ""):
            value, src = env[env_key], f"env:{env_key}"
        if name in section:
            value, src = section[name], "config"
        elif cmd == "synth" and name == "seed" and "seed" in toml_doc:
            value, src = toml_doc["seed"], "config"
        if flags.get(name) is not None:
            value, src = flags[name], "flag"
        value = _cast(typ, value, name)
        if name in _CHOICES and value is not None and value not in _CHOICES[name]:
            raise UsageError(f"--{name.replace('_', '-')} must be one of {_CHOICES[name]}, got {value!r}")
        if typ == "path" and value is not None:
            p = Path(value).expanduser().resolve()
            if not p.is_file():
                raise UsageError(f"--{name.replace('_', '-')}: no such file: {value}")
            value = str(p)
        cfg[name] = value
        sources[name] = src
    if cmd == "synth":
        # fault and outcome models come only from the config file
        faults, outcome, _ = synth_config_from_dict(toml_doc)
        cfg["faults"] = dict(sorted(faults.probabilities.items()))
        cfg["outcome"] = {"bias": outcome.bias, "weights": dict(sorted(outcome.weights.items()))}
        sources["faults"] = sources["outcome"] = "config" if toml_doc else "default"
    return cfg, sources


# -- helpers -----------------------------------------------------------------


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


class _Outputs:
    def __init__(self, out: Path):
        self.out = out
        self.files = []

    def write(self, name: str, data: bytes | str):
        if isinstance(data, str):
            data = data.encode("utf-8")
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.files.append(name)

    def tables(self, stem: str, results, fmt: str):
        for f in FORMATS if fmt == "all" else (fmt,):
            self.write(f"{stem}.{EXT[f]}", render_report(results, f))


def _json_bytes(doc) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def _flag_matrix(cfg):
    if cfg.get("ground_truth"):
        return matrix_from_ground_truth(GroundTruth.from_jsonl(_read_bytes(cfg["ground_truth"])))
    if not cfg.get("traces") or not cfg.get("flags"):
        raise UsageError("need --traces and --flags, or --ground-truth")
    traces = parse_trace_corpus(_read_bytes(cfg["traces"]))
    vectors = flags_from_jsonl(_read_bytes(cfg["flags"]))
    return aggregate(vectors, {t.run_id: t.outcome for t in traces})


# -- subcommands -------------------------------------------------------------


def _cmd_synth(cfg, out: _Outputs):
    from .synth_env import FaultSpec, OutcomeModel

    faults = FaultSpec(cfg["faults"], seed=cfg["seed"])
    outcome = OutcomeModel(cfg["outcome"]["bias"], cfg["outcome"]["weights"])
    corpus, truth = generate_corpus(cfg["runs"], faults, outcome, seed=cfg["seed"])
    out.write("corpus.jsonl", serialize_corpus(corpus))
    out.write("ground_truth.jsonl", truth.to_jsonl())


def _cmd_judge(cfg, out: _Outputs):
    if not cfg["traces"]:
        raise UsageError("judge needs --traces")
    traces = parse_trace_corpus(_read_bytes(cfg["traces"]))
    if cfg["judge"] == "rules":
        vectors = [judge_rules(t) for t in traces]
    else:
        if not cfg["endpoint"] or not cfg["model"]:
            raise UsageError("the llm judge needs an endpoint and a model (flags, config or JUDGE_* env)")
        audit = out.out / "judge_audit.jsonl"
        audit.unlink(missing_ok=True)
        jc = JudgeConfig(
            endpoint=cfg["endpoint"],
            model=cfg["model"],
            temperature=cfg["temperature"],
            max_in_flight=cfg["max_in_flight"],
            retry_budget=cfg["retry_budget"],
            timeout=cfg["timeout"],
            api_key=os.environ.get("JUDGE_API_KEY"),
            audit_path=str(audit),
        )
        vectors = judge_llm_corpus(traces, RUBRIC_IDS, jc)
        out.files.append("judge_audit.jsonl")
    out.write("flags.jsonl", flags_to_jsonl(vectors))


def _cmd_stats(cfg, out: _Outputs):
    out.tables("stats", stats_report(_flag_matrix(cfg)), cfg["format"])


def _cmd_bridge(cfg, out: _Outputs):
    from .static_xai.logreg import LogRegConfig

    m = _flag_matrix(cfg)
    report = run_bridge(m, LogRegConfig(l2=cfg["l2"]))
    out.tables("bridge", report, cfg["format"])
    out.tables("summary", summary_table(paradigm_summary(report, stats_report(m))), cfg["format"])
    out.write("beeswarm.json", beeswarm_json(report))
    out.write("bridge_fit.json", _json_bytes({
        "ranking": list(report.ranking),
        "scores": report.scores,
        "weights": report.weights,
        "bias": report.bias,
        "base_value": report.base_value,
        "converged": report.fit_info.converged,
        "n_iter": report.fit_info.n_iter,
    }))


def _cmd_report(cfg, out: _Outputs):
    from .static_xai.logreg import LogRegConfig

    if cfg["format"] == "all":
        raise UsageError("report needs a single --format")
    m = _flag_matrix(cfg)
    stats = stats_report(m)
    bridge = run_bridge(m, LogRegConfig(l2=cfg["l2"]))
    tables = to_tables([stats, bridge, summary_table(paradigm_summary(bridge, stats))])
    out.write(f"report.{EXT[cfg['format']]}", render_report(tables, cfg["format"]))


def _cmd_static_xai(cfg, out: _Outputs):
    from .static_xai import (
        LogRegConfig,
        StabilityConfig,
        TfIdfConfig,
        fit_tfidf,
        mean_abs_shap,
        pdp,
        predict_proba,
        shap_linear,
        stability_score,
        train_logreg,
        transform,
        transform_many,
    )
    from .static_xai.corpus import read_labelled_csv, synthetic_job_postings

    if cfg["data"]:
        docs, labels = read_labelled_csv(cfg["data"])
        corpus_digest = _sha256_file(cfg["data"])
    else:
        docs, labels = synthetic_job_postings(cfg["synthetic_docs"], seed=cfg["seed"])
        corpus_digest = hashlib.sha256("\n".join(docs).encode("utf-8")).hexdigest()
    if not 0.0 < cfg["test_fraction"] < 1.0:
        raise UsageError("--test-fraction must be in (0, 1)")
    rng = np.random.default_rng(cfg["seed"])
    perm = rng.permutation(len(docs))
    n_test = max(1, int(math.ceil(cfg["test_fraction"] * len(docs))))
    test_idx, train_idx = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    train_docs = [docs[i] for i in train_idx]
    test_docs = [docs[i] for i in test_idx]
    y_train, y_test = labels[train_idx], labels[test_idx]

    vec = fit_tfidf(train_docs, TfIdfConfig(ngram_range=(1, cfg["ngram_max"]), min_df=cfg["min_df"], max_df=cfg["max_df"]))
    X_train = transform_many(vec, train_docs)
    lr_cfg = LogRegConfig(max_iter=cfg["max_iter"], tol=cfg["tol"], l2=cfg["l2"])
    model = train_logreg(X_train, y_train, lr_cfg, feature_names=vec.feature_names)
    out.write("tfidf.json", vec.to_json())
    out.write("model.json", model.to_json())

    X_test = transform_many(vec, test_docs)
    pred = (np.asarray(predict_proba(model, X_test)) >= 0.5).astype(int)
    tp = int(np.sum((pred == 1) & (y_test == 1)))
    fp = int(np.sum((pred == 1) & (y_test == 0)))
    fn = int(np.sum((pred == 0) & (y_test == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    out.write("metrics.json", _json_bytes({
        "n_train": int(train_idx.size),
        "n_test": int(test_idx.size),
        "n_features": vec.n_features,
        "accuracy": float(np.mean(pred == y_test)),
        "precision": precision,
        "recall": recall,
        "f1": 2 * precision * recall / (precision + recall) if precision + recall else 0.0,
        "converged": model.fit_info.converged,
        "n_iter": model.fit_info.n_iter,
    }))

    glob = mean_abs_shap(model, X_train)
    out.tables("attribution", glob, cfg["format"])

    def explain(text, m=model):
        return shap_linear(m, transform(vec, text)).values

    def refit(r):
        idx = r.integers(0, X_train.shape[0], size=X_train.shape[0])
        m = train_logreg(X_train[idx], y_train[idx], lr_cfg, feature_names=vec.feature_names)
        return lambda text: explain(text, m)

    scfg = StabilityConfig(k=cfg["k"], n_perturb=cfg["n_perturb"], perturbation=cfg["perturbation"],
                           rate=cfg["rate"], seed=cfg["seed"])
    instances = test_docs[: cfg["n_instances"]]
    stab = stability_score(explain, instances, scfg, refit=refit)
    out.write("stability.json", _json_bytes({
        "score": stab.score,
        "n_pairs": stab.n_pairs,
        "n_skipped": stab.n_skipped,
        "n_instances": len(instances),
        "k": scfg.k,
        "n_perturb": scfg.n_perturb,
        "perturbation": scfg.perturbation,
        "rate": scfg.rate,
        "seed": scfg.seed,
    }))

    sample = X_train[: min(500, X_train.shape[0])]
    curves = {}
    for i, _ in glob.top(5):
        hi = float(X_train[:, i].max())
        curves[vec.feature_names[i]] = pdp(lambda X: predict_proba(model, X), sample, i, np.linspace(0.0, hi, 5))
    out.write("pdp.csv", pdp_csv(curves))
    packet = build_global_static_mep("model.json", glob, max(-1.0, min(1.0, stab.score)),
                                     corpus_digest=corpus_digest, pdp_ref="pdp.csv", top_k=cfg["top_k"])
    out.write("global.mep.json", serialize(packet))


def _cmd_mep(cfg, out: _Outputs):
    if cfg["paradigm"] == "static":
        _static_packet(cfg, out)
        return
    if not cfg["traces"] or not cfg["flags"]:
        raise UsageError("agentic packets need --traces and --flags")
    traces = parse_trace_corpus(_read_bytes(cfg["traces"]))
    flags = {v.run_id: v for v in flags_from_jsonl(_read_bytes(cfg["flags"]))}
    faults = outcome = None
    if cfg["synth_config"]:
        faults, outcome, _ = synth_config_from_dict(_read_toml(cfg["synth_config"]))
    selected = [t for t in traces if cfg["run_id"] in (None, t.run_id)]
    if not selected:
        raise DataError(f"run {cfg['run_id']!r} not found in the corpus")
    for t in selected:
        if t.run_id not in flags:
            raise DataError(f"no flag vector for run {t.run_id!r}")
        replay_ok = None
        if faults is not None:
            replay_ok = serialize_trajectory(replay(replay_config_for(t, faults, outcome))) == serialize_trajectory(t)
        packet = build_agentic_mep(t, flags[t.run_id], replay_ok, validate_trajectory(t))
        out.write(f"packets/{t.run_id}.mep.json", serialize(packet))


def _static_packet(cfg, out: _Outputs):
    from .static_xai import LinearModel, TfIdfModel, predict_proba, shap_linear, transform

    for name in ("model_file", "tfidf_file", "stability_file", "text"):
        if cfg[name] is None:
            raise UsageError(f"static packets need --{name.replace('_', '-')}")
    model = LinearModel.from_json(_read_bytes(cfg["model_file"]).decode("utf-8"))
    vec = TfIdfModel.from_json(_read_bytes(cfg["tfidf_file"]).decode("utf-8"))
    try:
        stability = float(json.loads(_read_bytes(cfg["stability_file"]))["score"])
    except (ValueError, KeyError, TypeError):
        raise DataError("stability file must be a JSON object with a numeric 'score'") from None
    x = transform(vec, cfg["text"])
    p = float(predict_proba(model, x))
    label = int(p >= 0.5)
    packet = build_static_mep(
        f"sha256:{_sha256_file(cfg['model_file'])}",
        cfg["text"],
        shap_linear(model, x),
        stability,
        predicted_label=label,
        confidence=p if label else 1.0 - p,
        top_k=cfg["top_k"],
    )
    out.write("instance.mep.json", serialize(packet))


_HANDLERS = {
    "synth": _cmd_synth,
    "judge": _cmd_judge,
    "stats": _cmd_stats,
    "static-xai": _cmd_static_xai,
    "bridge": _cmd_bridge,
    "mep": _cmd_mep,
    "report": _cmd_report,
}


# -- execution ---------------------------------------------------------------


def execute(cmd: str, cfg: dict, out_dir, argv=None, sources=None) -> dict:
    """Run a subcommand from a fully resolved config and write its manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = [
        {"param": name, "path": cfg[name], "sha256": _sha256_file(cfg[name])}
        for name, (typ, _, _) in _TABLES[cmd].items()
        if typ == "path" and cfg.get(name)
    ]
    outputs = _Outputs(out_dir)
    _HANDLERS[cmd](cfg, outputs)
    manifest = {
        "tool": "tracexai",
        "version": __version__,
        "subcommand": cmd,
        "argv": list(argv) if argv is not None else None,
        "seed": cfg.get("seed"),
        "config": cfg,
        "config_sources": sources,
        "inputs": inputs,
        "outputs": [{"path": f, "sha256": _sha256_file(out_dir / f)} for f in sorted(outputs.files)],
    }
    (out_dir / MANIFEST).write_bytes(_json_bytes(manifest))
    return manifest


def rerun_manifest(manifest_path, out_dir) -> dict:
    """Re-execute a manifest's resolved config; inputs must still match their recorded digests."""
    try:
        manifest = json.loads(_read_bytes(manifest_path))
        cmd, cfg = manifest["subcommand"], manifest["config"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"unreadable manifest {manifest_path}: {exc}") from None
    if cmd not in _HANDLERS:
        raise DataError(f"manifest names unknown subcommand {cmd!r}")
    for rec in manifest.get("inputs", []):
        if not Path(rec["path"]).is_file() or _sha256_file(rec["path"]) != rec["sha256"]:
            raise DataError(f"input {rec['path']} is missing or changed since the manifest was written")
    return execute(cmd, cfg, out_dir, argv=manifest.get("argv"), sources=manifest.get("config_sources"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tracexai", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"tracexai {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for cmd, params in _TABLES.items():
        p = sub.add_parser(cmd, help=f"{cmd} pipeline")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="TOML config file")
        for name, (typ, default, help_text) in params.items():
            kwargs = {"default": None, "help": f"{help_text} (default: {default})"}
            if name in _CHOICES:
                kwargs["choices"] = _CHOICES[name]
            if typ in (int, float):
                kwargs["type"] = typ
            p.add_argument("--" + name.replace("_", "-"), dest=name, **kwargs)
    p = sub.add_parser("rerun", help="re-execute a run.json manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def run_command(argv, env=None) -> int:
    env = os.environ if env is None else env
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "rerun":
            rerun_manifest(args.manifest, args.out)
            return EXIT_OK
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "out", "config")}
        toml_doc = _read_toml(args.config) if args.config else None
        cfg, sources = resolve_config(args.command, flags, toml_doc, env)
        for name in cfg:
            print(f"tracexai {args.command}: {name}={cfg[name]!r} [{sources[name]}]", file=sys.stderr)
        execute(args.command, cfg, args.out, argv=list(argv), sources=sources)
        return EXIT_OK
    except UsageError as exc:
        print(f"tracexai: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TransportError as exc:
        print(f"tracexai: transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (DataError, ValueError) as exc:
        print(f"tracexai: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TraceXAIError as exc:
        print(f"tracexai: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
