"""Command-line experiment runner.

Subcommands: ``gen`` (synthetic datasets), ``train`` (EM or mixture
training), ``eval`` (metrics over one or more runs), ``learning-curve``
(annotation-budget sweep on the treebank task), and ``equivalence``
(exact-mode mixture training vs. EM on random corpora).

Every option can also come from a flat ``key=value`` config file passed
with ``--config``; command-line flags take precedence over the file.
Result files are byte-identical across reruns with the same settings;
wall-clock measurements go to a separate ``timings.log``.

Exit codes: 0 on success, 1 on data errors (including a failed
equivalence check), 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .core import (LearnerConfig, RolloutConfig, StoppingRule, derive_seed,
                   policy_from_dict, policy_to_dict, run_policy, searn_learn)
from .datagen import (DocGenConfig, HmmGenConfig, TreebankGenConfig,
                      gen_document_corpus, gen_hmm_dataset, gen_hmm_params,
                      gen_treebank)
from .em import (HmmParams, MultinomialMixtureParams, hmm_decode,
                 hmm_em_train, hmm_posterior_decode, mm_e_step,
                 mm_em_train, mm_log_likelihood, mm_random_init)
from .errors import ConfigError, DataError
from .experiments import ParseExperiment, equivalence_sweep, learning_curve
from .metrics import (corpus_arc_accuracy, matched_hamming, summarize,
                      write_runs_csv, write_summary_json)
from .task_cluster import read_documents, write_documents
from .task_depparse import (ParseTask, ParseTaskConfig, TaggedSentence,
                            load_conll, write_conll)
from .task_sequence import (SequenceTask, SequenceTaskConfig, latent_labels,
                            read_sequences, write_sequences)

_GEN_KEY = 701
_TRAIN_KEY = 702
_EVAL_KEY = 703

_TASKS = ("cluster", "sequence", "depparse")
_METHODS = ("em", "searn-nb", "searn-lr")
_SUPERVISION = ("unsup", "sup", "semi")


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class ExperimentConfig:
    """Flat bag of every option; flags and config-file keys mirror it."""

    task: str | None = None
    method: str | None = None
    supervision: str = "unsup"
    beta: float | None = None
    n_samples: int | None = None
    iterations: int | None = None
    seeds: tuple = (0,)
    seed: int = 0
    labeled_count: int | None = None
    labeled_counts: tuple = (50, 150, 500)
    data: str | None = None
    gold: str | None = None
    model: str | None = None
    out: str = "runs"
    order: int = 1
    k: int = 2
    v: int | None = None
    runs: int | None = None
    sequences: int = 5
    mean_length: float = 40.0
    sentences: int = 620
    tagset: int = 12
    documents: int = 10
    clusters: int = 2
    doc_mean_length: float = 20.0
    smoothing: float | None = None
    lr_variance: float = 10.0
    tree_variance: float = 10.0
    tag_variance: float = 10.0
    exact: bool = False
    posterior_decode: bool = False
    em_tol: float = 1e-5


_INT_LIST_KEYS = {"seeds", "labeled_counts"}
_BOOL_KEYS = {"exact", "posterior_decode"}


def _parse_int_list(text: str) -> tuple:
    try:
        return tuple(int(part) for part in str(text).split(",") if part != "")
    except ValueError:
        raise ConfigError(f"expected a comma-separated integer list, "
                          f"got {text!r}")


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected true/false, got {text!r}")


def _coerce(name: str, value, target_type):
    if name in _INT_LIST_KEYS:
        return _parse_int_list(value)
    if name in _BOOL_KEYS:
        return _parse_bool(value)
    try:
        return target_type(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {value!r}")


def read_config_file(path) -> dict:
    """Flat key=value lines; '#' starts a comment; keys mirror the flags."""
    known = {f.name: f for f in fields(ExperimentConfig)}
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value.strip(), _FIELD_TYPES[key])
    return out


_FIELD_TYPES = {
    "task": str, "method": str, "supervision": str, "beta": float,
    "n_samples": int, "iterations": int, "seeds": tuple, "seed": int,
    "labeled_count": int, "labeled_counts": tuple, "data": str,
    "gold": str, "model": str, "out": str, "order": int, "k": int,
    "v": int, "runs": int, "sequences": int, "mean_length": float,
    "sentences": int, "tagset": int, "documents": int, "clusters": int,
    "doc_mean_length": float, "smoothing": float, "lr_variance": float,
    "tree_variance": float, "tag_variance": float, "exact": bool,
    "posterior_decode": bool, "em_tol": float,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="searn",
        description="Structured-prediction experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in ("gen", "train", "eval", "learning-curve", "equivalence"):
        p = sub.add_parser(command)
        p.add_argument("--config", default=None,
                       help="flat key=value settings file")
        for name, target in _FIELD_TYPES.items():
            flag = "--" + name.replace("_", "-")
            if name in _BOOL_KEYS:
                p.add_argument(flag, action="store_const", const=True,
                               default=None)
            elif name in _INT_LIST_KEYS:
                p.add_argument(flag, type=str, default=None)
            else:
                p.add_argument(flag, type=target, default=None)
    return parser


def merge_config(args: argparse.Namespace) -> tuple:
    """defaults < config file < explicit flags; returns (config, provided)."""
    values = {}
    provided = set()
    if args.config:
        file_values = read_config_file(args.config)
        values.update(file_values)
        provided.update(file_values)
    for name in _FIELD_TYPES:
        flag_value = getattr(args, name)
        if flag_value is not None:
            values[name] = _coerce(name, flag_value, _FIELD_TYPES[name])
            provided.add(name)
    cfg = ExperimentConfig(**values)
    _validate(cfg)
    return cfg, provided


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.task is not None and cfg.task not in _TASKS:
        raise ConfigError(f"unknown task {cfg.task!r}")
    if cfg.method is not None and cfg.method not in _METHODS:
        raise ConfigError(f"unknown method {cfg.method!r}")
    if cfg.supervision not in _SUPERVISION:
        raise ConfigError(f"unknown supervision {cfg.supervision!r}")
    if cfg.method == "em" and cfg.task == "depparse":
        raise ConfigError("the em method applies to cluster and sequence "
                          "tasks only")
    if cfg.supervision != "unsup" and cfg.task in ("cluster", "sequence"):
        raise ConfigError(f"the {cfg.task} task is unsupervised; "
                          "drop the supervision setting")
    if cfg.supervision == "semi" and cfg.labeled_count is None:
        raise ConfigError("semi-supervised runs need --labeled-count")
    if cfg.exact and (cfg.task, cfg.method) != ("cluster", "searn-nb"):
        raise ConfigError("--exact is the cluster-task equivalence mode "
                          "(searn-nb only)")


def _default_beta(cfg):
    return {"cluster": 1.0, "sequence": 0.5, "depparse": 0.1}[cfg.task]


def _default_n_samples(cfg):
    return {"cluster": 1, "sequence": 2, "depparse": 1}[cfg.task]


def _default_iterations(cfg):
    if cfg.method == "em":
        return 50
    return {"cluster": 10, "sequence": 4, "depparse": 10}[cfg.task]


def _default_vocab(cfg):
    return 5 if cfg.task == "cluster" else 10


def _resolved(cfg: ExperimentConfig) -> ExperimentConfig:
    """Fill task-dependent defaults for settings left unset."""
    if cfg.beta is None:
        cfg.beta = _default_beta(cfg)
    if cfg.n_samples is None:
        cfg.n_samples = _default_n_samples(cfg)
    if cfg.iterations is None:
        cfg.iterations = _default_iterations(cfg)
    if cfg.v is None:
        cfg.v = _default_vocab(cfg)
    if cfg.smoothing is None:
        cfg.smoothing = 0.0 if cfg.exact else 1.0
    if cfg.runs is None:
        cfg.runs = 10
    return cfg


def _out_dir(cfg) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# gen


def cmd_gen(cfg: ExperimentConfig) -> int:
    if cfg.task is None:
        raise ConfigError("gen needs --task")
    cfg = _resolved(cfg)
    out = _out_dir(cfg)
    if cfg.task == "sequence":
        for run in range(cfg.runs):
            run_seed = derive_seed(cfg.seed, _GEN_KEY, run)
            gen_cfg = HmmGenConfig(order=cfg.order, K=cfg.k, V=cfg.v,
                                   n_sequences=cfg.sequences,
                                   mean_length=cfg.mean_length,
                                   seed=run_seed)
            data = gen_hmm_dataset(gen_hmm_params(gen_cfg), gen_cfg)
            header = (f"task=sequence order={cfg.order} k={cfg.k} "
                      f"v={cfg.v} run={run} seed={run_seed}")
            write_sequences(out / f"sequences-run{run:02d}.txt",
                            [x for x, _ in data], cfg.v, header)
            write_sequences(out / f"sequences-run{run:02d}.gold.txt",
                            [g for _, g in data], cfg.k, header)
        print(f"wrote {cfg.runs} sequence datasets to {out}")
    elif cfg.task == "depparse":
        bank = gen_treebank(TreebankGenConfig(
            n_sentences=cfg.sentences, tagset_size=cfg.tagset,
            seed=cfg.seed))
        header = (f"task=depparse tagset={cfg.tagset} "
                  f"sentences={cfg.sentences} seed={cfg.seed}")
        write_conll(out / "treebank.conll", bank, header_comment=header)
        print(f"wrote {len(bank)} sentences to {out / 'treebank.conll'}")
    else:
        corpus = gen_document_corpus(DocGenConfig(
            n_documents=cfg.documents, vocab_size=cfg.v,
            n_clusters=cfg.clusters, mean_length=cfg.doc_mean_length,
            seed=cfg.seed))
        header = (f"task=cluster v={cfg.v} clusters={cfg.clusters} "
                  f"documents={cfg.documents} seed={cfg.seed}")
        write_documents(out / "documents.txt", [d for d, _ in corpus],
                        cfg.v, header)
        _write_labels(out / "documents.gold.txt",
                      [label for _, label in corpus], header)
        print(f"wrote {cfg.documents} documents to {out / 'documents.txt'}")
    return 0


def _write_labels(path, labels, header_comment: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header_comment:
            for line in header_comment.splitlines():
                fh.write(f"# {line}\n")
        for label in labels:
            fh.write(f"{int(label)}\n")


def _read_labels(path) -> np.ndarray:
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed label line")
    if not labels:
        raise DataError(f"{path}: no labels")
    return np.asarray(labels, dtype=np.int64)


# ---------------------------------------------------------------------------
# train


def _write_train_log(path, rows) -> None:
    """rows: (iteration, dev_accuracy or None, loss) triples."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "dev_accuracy", "loss"])
        for iteration, dev, loss in rows:
            dev_text = "" if dev is None else f"{dev:.12g}"
            writer.writerow([iteration, dev_text, f"{loss:.12g}"])


def _write_timings(path, per_iteration, total: float) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, seconds in enumerate(per_iteration, start=1):
            fh.write(f"iteration {i}: {seconds:.3f}s\n")
        fh.write(f"total: {total:.3f}s\n")


def _write_model(path, blob: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _hmm_params_to_dict(params: HmmParams) -> dict:
    return {"kind": "hmm", "initial": params.initial.tolist(),
            "transition": params.transition.tolist(),
            "emission": params.emission.tolist()}


def _mm_params_to_dict(params: MultinomialMixtureParams) -> dict:
    return {"kind": "mm", "rho": params.rho.tolist(),
            "theta": params.theta.tolist()}


def cmd_train(cfg: ExperimentConfig) -> int:
    if cfg.task is None or cfg.method is None:
        raise ConfigError("train needs --task and --method")
    if cfg.data is None:
        raise ConfigError("train needs --data")
    cfg = _resolved(cfg)
    out = _out_dir(cfg)
    t0 = time.perf_counter()

    if cfg.task == "sequence":
        xs, vocab = read_sequences(cfg.data)
        if not xs:
            raise DataError(f"{cfg.data}: no sequences")
        if cfg.method == "em":
            params, ll_history = hmm_em_train(
                xs, cfg.k, vocab, iterations=cfg.iterations,
                seed=cfg.seed, tol=cfg.em_tol)
            blob = {"format_version": 1, "method": "em",
                    "task": {"task": "sequence", "k": cfg.k, "v": vocab},
                    "params": _hmm_params_to_dict(params)}
            rows = [(i + 1, None, -ll) for i, ll in enumerate(ll_history)]
            per_iter = []
        else:
            kind = cfg.method.split("-")[1]
            mode = "nb_hmm" if kind == "nb" else "lr_window"
            task = SequenceTask(SequenceTaskConfig(K=cfg.k, V=vocab,
                                                   feature_mode=mode))
            history, per_iter = [], []
            policy = searn_learn(
                task, xs,
                LearnerConfig(kind=kind, smoothing=cfg.smoothing,
                              l2_variance=cfg.lr_variance),
                beta=cfg.beta,
                cfg=RolloutConfig(seed=derive_seed(cfg.seed, _TRAIN_KEY),
                                  n_samples=cfg.n_samples),
                stopping=StoppingRule(max_iterations=cfg.iterations,
                                      patience=None),
                history=history, timings=per_iter)
            blob = {"format_version": 1, "method": cfg.method,
                    "task": {"task": "sequence", "k": cfg.k, "v": vocab,
                             "feature_mode": mode},
                    "policy": policy_to_dict(policy, task.interner)}
            rows = [(h["iteration"], h.get("dev_accuracy"),
                     h["classification_loss"]) for h in history]

    elif cfg.task == "cluster":
        docs, vocab = read_documents(cfg.data)
        if cfg.method == "em":
            init = mm_random_init(cfg.k, vocab, cfg.seed)
            params, trajectory = mm_em_train(docs, init,
                                             iterations=cfg.iterations)
            blob = {"format_version": 1, "method": "em",
                    "task": {"task": "cluster", "k": cfg.k, "v": vocab},
                    "params": _mm_params_to_dict(params)}
            rows = [(i + 1, None, -mm_log_likelihood(p, docs))
                    for i, p in enumerate(trajectory)]
            per_iter = []
        else:
            if not cfg.exact or cfg.beta != 1.0:
                raise ConfigError(
                    "cluster training is the exact-mode equivalence path; "
                    "use --exact (beta stays 1)")
            from .task_cluster import ClusterTask, ClusterTaskConfig
            task = ClusterTask(ClusterTaskConfig(K=cfg.k, V=vocab,
                                                 exact_mode=True))
            dataset = [np.asarray(d, dtype=float) for d in docs]
            history, per_iter = [], []
            # Same random initialization as the EM path with this seed, so
            # the two trainers' trajectories are directly comparable.
            start = task.policy_from_params(
                mm_random_init(cfg.k, vocab, cfg.seed))
            policy = searn_learn(
                task, dataset,
                LearnerConfig(kind="nb", smoothing=cfg.smoothing),
                beta=1.0,
                cfg=RolloutConfig(mode="exact", seed=cfg.seed),
                stopping=StoppingRule(max_iterations=cfg.iterations,
                                      patience=None),
                start=start, history=history, timings=per_iter)
            rule = policy.components[-1][0]
            params = task.params_from_rule(rule)
            blob = {"format_version": 1, "method": cfg.method,
                    "task": {"task": "cluster", "k": cfg.k, "v": vocab},
                    "params": _mm_params_to_dict(params)}
            rows = [(h["iteration"], h.get("dev_accuracy"),
                     h["classification_loss"]) for h in history]

    else:  # depparse
        if cfg.method == "em":
            raise ConfigError("the em method applies to cluster and "
                              "sequence tasks only")
        sentences, rejected = load_conll(cfg.data)
        if rejected:
            print(f"warning: {rejected} malformed sentences skipped",
                  file=sys.stderr)
        if not sentences:
            raise DataError(f"{cfg.data}: no sentences")
        data = _apply_supervision(sentences, cfg.supervision,
                                  cfg.labeled_count)
        kind = cfg.method.split("-")[1]
        task = ParseTask(ParseTaskConfig(tagset_size=cfg.tagset,
                                         supervision=cfg.supervision))
        history, per_iter = [], []
        policy = searn_learn(
            task, data,
            LearnerConfig(kind=kind, smoothing=cfg.smoothing,
                          l2_variance={"parse": cfg.tree_variance,
                                       "tag": cfg.tag_variance}),
            beta=cfg.beta,
            cfg=RolloutConfig(seed=derive_seed(cfg.seed, _TRAIN_KEY),
                              n_samples=cfg.n_samples),
            stopping=StoppingRule(max_iterations=cfg.iterations,
                                  patience=None),
            history=history, timings=per_iter)
        blob = {"format_version": 1, "method": cfg.method,
                "task": {"task": "depparse", "tagset": cfg.tagset,
                         "supervision": cfg.supervision},
                "policy": policy_to_dict(policy, task.interner)}
        rows = [(h["iteration"], h.get("dev_accuracy"),
                 h["classification_loss"]) for h in history]

    _write_model(out / "model.json", blob)
    _write_train_log(out / "train-log.csv", rows)
    _write_timings(out / "timings.log", per_iter, time.perf_counter() - t0)
    print(f"wrote {out / 'model.json'}")
    return 0


def _apply_supervision(sentences, supervision: str, labeled_count):
    """Keep gold trees per the supervision mode (training inputs only)."""
    bare = [TaggedSentence(s.tags) for s in sentences]
    if supervision == "sup":
        missing = sum(1 for s in sentences if s.gold_tree is None)
        if missing:
            raise DataError("supervised training needs gold trees on "
                            f"every sentence ({missing} missing)")
        return list(sentences)
    if supervision == "unsup":
        return bare
    if labeled_count > len(sentences):
        raise ConfigError("labeled_count exceeds the dataset")
    return list(sentences[:labeled_count]) + bare[labeled_count:]


# ---------------------------------------------------------------------------
# eval


def _split_list(text) -> list:
    return [part for part in str(text).split(",") if part]


def _load_model(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            blob = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a model file ({exc})")
    if blob.get("format_version") != 1:
        raise DataError(f"{path}: unsupported model format")
    return blob


def _eval_one(blob: dict, data_path, gold_path, cfg, run: int) -> tuple:
    """Returns (metric_name, value) for one (model, dataset) pairing."""
    spec = blob["task"]
    task_name = spec["task"]
    if task_name == "sequence":
        xs, _ = read_sequences(data_path)
        gold_seqs, k_gold = read_sequences(gold_path)
        gold = np.concatenate([np.asarray(g) for g in gold_seqs])
        if blob["method"] == "em":
            params = HmmParams(
                initial=blob["params"]["initial"],
                transition=blob["params"]["transition"],
                emission=blob["params"]["emission"])
            decoder = (hmm_posterior_decode if cfg.posterior_decode
                       else hmm_decode)
            pred = np.concatenate([decoder(params, x) for x in xs])
        else:
            task = SequenceTask(SequenceTaskConfig(
                K=spec["k"], V=spec["v"],
                feature_mode=spec["feature_mode"]))
            policy, task.interner = policy_from_dict(blob["policy"])
            preds = []
            for i, x in enumerate(xs):
                rng = np.random.default_rng(
                    derive_seed(cfg.seed, _EVAL_KEY, run, i))
                preds.append(latent_labels(run_policy(task, x, policy,
                                                      rng)))
            pred = np.concatenate(preds)
        return "matched_hamming", matched_hamming(pred, gold,
                                                  spec["k"], k_gold)
    if task_name == "cluster":
        docs, _ = read_documents(data_path)
        gold = _read_labels(gold_path)
        params = MultinomialMixtureParams(rho=blob["params"]["rho"],
                                          theta=blob["params"]["theta"])
        pred = np.argmax(mm_e_step(params, docs), axis=1)
        return "matched_hamming", matched_hamming(pred, gold,
                                                  params.rho.shape[0],
                                                  int(gold.max()) + 1)
    # depparse
    sentences, rejected = load_conll(data_path)
    if rejected:
        print(f"warning: {rejected} malformed sentences skipped",
              file=sys.stderr)
    golds = [s.gold_tree for s in sentences]
    if any(g is None for g in golds):
        raise DataError("evaluation needs gold trees on every sentence")
    task = ParseTask(ParseTaskConfig(tagset_size=spec["tagset"],
                                     supervision=spec["supervision"]))
    policy, task.interner = policy_from_dict(blob["policy"])
    keep_gold = spec["supervision"] == "sup"
    preds = []
    for i, sent in enumerate(sentences):
        inp = sent if keep_gold else TaggedSentence(sent.tags)
        rng = np.random.default_rng(derive_seed(cfg.seed, _EVAL_KEY,
                                                run, i))
        preds.append(run_policy(task, inp, policy, rng).tree)
    return "arc_accuracy", corpus_arc_accuracy(preds, golds)


def cmd_eval(cfg: ExperimentConfig) -> int:
    if cfg.model is None or cfg.data is None:
        raise ConfigError("eval needs --model and --data")
    models = _split_list(cfg.model)
    datas = _split_list(cfg.data)
    golds = _split_list(cfg.gold) if cfg.gold else [None]
    n_runs = max(len(models), len(datas), len(golds))

    def pick(items, i):
        if len(items) == 1:
            return items[0]
        if len(items) != n_runs:
            raise ConfigError("model/data/gold lists must have equal "
                              "length (or be single)")
        return items[i]

    out = _out_dir(cfg)
    metric_name = None
    values = []
    for run in range(n_runs):
        blob = _load_model(pick(models, run))
        if blob["task"]["task"] != "depparse" and pick(golds, run) is None:
            raise ConfigError("eval needs --gold for this task")
        name, value = _eval_one(blob, pick(datas, run), pick(golds, run),
                                cfg, run)
        if metric_name is not None and name != metric_name:
            raise ConfigError("cannot aggregate runs across metrics")
        metric_name = name
        values.append(value)
    summary = summarize(values, metric=metric_name)
    write_runs_csv(out / "metrics.csv", [summary])
    write_summary_json(out / "summary.json", [summary])
    sigma = "" if summary.single_run else f" +/- {summary.std:.4f}"
    print(f"{metric_name}: mean {summary.mean:.4f}{sigma} "
          f"over {summary.n_runs} run(s)")
    return 0


# ---------------------------------------------------------------------------
# learning-curve


def cmd_learning_curve(cfg: ExperimentConfig) -> int:
    if cfg.task is None:
        cfg.task = "depparse"
    if cfg.task != "depparse":
        raise ConfigError("learning curves are a depparse protocol")
    cfg = _resolved(cfg)
    out = _out_dir(cfg)
    exp = ParseExperiment(
        n_sentences=cfg.sentences, tagset_size=cfg.tagset,
        beta=cfg.beta, n_samples=cfg.n_samples, iterations=cfg.iterations,
        tree_variance=cfg.tree_variance, tag_variance=cfg.tag_variance)
    t0 = time.perf_counter()
    rows = learning_curve(exp, cfg.labeled_counts, master_seeds=cfg.seeds)
    with open(out / "curve.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arm", "labeled_count", "mean", "two_sigma",
                         "values"])
        for row in rows:
            writer.writerow([row.arm, row.labeled_count,
                             f"{row.mean:.12g}", f"{row.two_sigma:.12g}",
                             ";".join(f"{v:.12g}" for v in row.values)])
    _write_timings(out / "timings.log", [], time.perf_counter() - t0)
    print(f"wrote {out / 'curve.csv'} "
          f"({len(rows)} points, seeds {list(cfg.seeds)})")
    return 0


# ---------------------------------------------------------------------------
# equivalence


def cmd_equivalence(cfg: ExperimentConfig) -> int:
    if cfg.runs is None:
        cfg.runs = 20
    if cfg.task is None:
        cfg.task = "cluster"
    cfg = _resolved(cfg)
    out = _out_dir(cfg)
    reports = equivalence_sweep(
        n_corpora=cfg.runs, n_documents=cfg.documents, vocab_size=cfg.v,
        iterations=cfg.iterations, master_seed=cfg.seed)
    blob = {
        "n_corpora": len(reports),
        "iterations": cfg.iterations,
        "tolerance": reports[0].tolerance,
        "all_passed": all(r.passed for r in reports),
        "max_diff": max(r.max_diff for r in reports),
        "per_corpus": [{"passed": r.passed, "max_diff": r.max_diff}
                       for r in reports],
    }
    with open(out / "equivalence.json", "w", encoding="utf-8") as fh:
        json.dump(blob, fh, indent=2, sort_keys=True)
        fh.write("\n")
    status = "PASS" if blob["all_passed"] else "FAIL"
    print(f"{status}: max parameter gap {blob['max_diff']:.3g} over "
          f"{blob['n_corpora']} corpora")
    return 0 if blob["all_passed"] else 1


# ---------------------------------------------------------------------------


_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "learning-curve": cmd_learning_curve,
    "equivalence": cmd_equivalence,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, _ = merge_config(args)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
