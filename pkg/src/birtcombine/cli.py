"""Command-line entry point: ``birtcombine <command> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .birt import FitConfig, ObservationMatrix, ability_report, fit_birt, reconstruction_rmse, save_params
from .combiner import FittedCombiner, PredictionMatrix, fit_combiner
from .errors import InputError, NumericError
from .io import gold_for, read_predictions, write_jsonl, write_predictions
from .metrics import metric_report
from .scale import load_scale

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    return data


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _fit_config(args, cfg: dict) -> FitConfig:
    fit = dict(cfg.get("fit", {}))
    if args.seed is not None:
        fit["seed"] = args.seed
    return FitConfig.from_dict(fit)


def cmd_featurize(args) -> int:
    from .features import ConnectiveLexicon, FeatureConfig, featurize_corpus, read_corpus, write_feature_csv

    cfg = _load_json(args.config)
    corpus = args.corpus or cfg.get("corpus")
    if not corpus:
        raise InputError("featurize needs --corpus")
    table = featurize_corpus(
        read_corpus(corpus),
        ConnectiveLexicon.load(args.lexicon or cfg.get("lexicon")),
        FeatureConfig.from_dict(cfg.get("feature_config")),
        workers=args.workers,
    )
    out = _out_dir(args)
    write_feature_csv(table, out / "features.csv", out / "registry.json")
    print(f"{len(table.ids)} essays x {len(table.registry)} features -> {out / 'features.csv'}")
    return EXIT_OK


def cmd_synth_corpus(args) -> int:
    from .pipeline import synth_corpus

    cfg = _load_json(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.scale:
        cfg["scale"] = args.scale
        cfg.setdefault("preset", args.scale if args.scale in ("eebr", "bpne") else None)
    if args.n is not None:
        cfg["n"] = args.n
    corpus = synth_corpus(cfg)
    paths = corpus.write(_out_dir(args))
    print(", ".join(f"{k}: {v}" for k, v in paths.items()))
    return EXIT_OK


def cmd_synth_birt(args) -> int:
    from .pipeline import synth_birt_matrix

    obs, truth = synth_birt_matrix(args.bands, args.models, args.seed or 0, args.noise, args.samples)
    out = _out_dir(args)
    _dump(obs.to_dict(), out / "observations.json")
    _dump(truth.to_dict(), out / "truth.json")
    print(f"{args.bands}x{args.models} matrix -> {out / 'observations.json'}")
    return EXIT_OK


def cmd_train_predict(args) -> int:
    from .features import read_feature_csv
    from .regressors import derive_seed, load_roster, parse_roster, predict, train

    cfg = _load_json(args.config)
    roster_src = args.roster or cfg.get("roster")
    if not roster_src:
        raise InputError("train-predict needs --roster")
    roster = load_roster(roster_src) if isinstance(roster_src, str) else parse_roster(roster_src)
    tr = read_feature_csv(args.train)
    te = read_feature_csv(args.test or args.train)
    if te.names != tr.names:
        raise InputError("train and test feature columns differ")
    seed = args.seed or 0
    cols = [predict(train(spec, tr.X, tr.y, derive_seed(seed, "model", mid)), te.X) for mid, spec in roster.items()]
    pm = PredictionMatrix(np.column_stack(cols), tuple(roster), te.ids)
    out = _out_dir(args) / "predictions.csv"
    write_predictions(pm, out)
    print(f"{len(roster)} models x {len(te.ids)} instances -> {out}")
    return EXIT_OK


def cmd_fit_irt(args) -> int:
    cfg = _load_json(args.config)
    fit = _fit_config(args, cfg)
    out = _out_dir(args)
    if args.observations:
        obs = ObservationMatrix.from_dict(_load_json(args.observations), fit.epsilon)
        params = fit_birt(obs, fit)
        save_params(params, out / "params.json")
        _dump(ability_report(params), out / "abilities.json")
        print(f"loss {params.initial_loss:.6g} -> {params.final_loss:.6g} in {params.iters} steps; "
              f"rmse {reconstruction_rmse(params, obs):.3g}")
        return EXIT_OK
    if not (args.predictions and args.gold):
        raise InputError("fit-irt needs --observations, or --predictions with --gold")
    scale = load_scale(args.scale or cfg.get("scale", "eebr"))
    preds = read_predictions(args.predictions)
    gold = gold_for(preds.instance_ids, args.gold)
    fc = fit_combiner(preds, gold, scale, fit)
    _dump(fc.to_dict(), out / "combiner.json")
    _dump(ability_report(fc.params, fc.model_ids, [str(s) for s in scale.band_scores]), out / "abilities.json")
    print(f"fitted {len(fc.model_ids)} models on {len(gold)} validation essays -> {out / 'combiner.json'}")
    return EXIT_OK


def cmd_combine(args) -> int:
    cfg = _load_json(args.config)
    fc = FittedCombiner.from_dict(_load_json(args.model))
    preds = read_predictions(args.predictions)
    opts = dict(cfg.get("combine", {}))
    if args.tiebreak:
        opts["tiebreak"] = args.tiebreak
    if args.unweighted:
        opts["weighted"] = False
    res = fc.combine(preds, **opts)
    out = _out_dir(args)
    with open(out / "combined.csv", "w") as fh:
        fh.write("instance_id,band,score,rule\n")
        for iid, b, s, r in zip(preds.instance_ids, res.bands, res.scores, res.rules):
            fh.write(f"{iid},{int(b)},{float(s)!r},{r}\n")
    write_jsonl(res.audit, out / "audit.jsonl")
    print(f"{len(res.rules)} decisions {res.rule_counts} -> {out / 'combined.csv'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_json(args.config)
    scale = load_scale(args.scale or cfg.get("scale", "eebr"))
    preds = read_predictions(args.predictions)
    gold = gold_for(preds.instance_ids, args.gold)
    gb = scale.bands_of(gold)
    report = {
        m: metric_report(gb, scale.bands_of(preds.values[:, j]), scale.n_bands, gold, preds.values[:, j])
        for j, m in enumerate(preds.model_ids)
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        (_out_dir(args) / "metrics.json").write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args) -> int:
    from .pipeline import ExperimentConfig, run_experiment

    if not args.config:
        raise InputError("run needs --config")
    cfg = ExperimentConfig.load(args.config)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.scale:
        over["scale"] = args.scale
    if args.workers:
        over["workers"] = args.workers
    if over:
        cfg = ExperimentConfig(**{**cfg.__dict__, **over})
    report = run_experiment(cfg)
    out = _out_dir(args)
    report.write(out / "report.json")
    (out / "report.txt").write_text(report.table())
    if args.audit:
        write_jsonl(report.audits, out / "audit.jsonl")
    sys.stdout.write(report.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--scale", help="built-in scale name (eebr, bpne) or scale JSON file")
    common.add_argument("--out", help="output directory (default: current directory)")

    parser = argparse.ArgumentParser(prog="birtcombine", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", parents=[common], help="essay JSONL -> feature CSV + registry")
    p.add_argument("--corpus", help="JSONL with id, text, score")
    p.add_argument("--lexicon", help="connective lexicon JSON")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_featurize)

    synth = sub.add_parser("synth", help="synthetic data")
    ssub = synth.add_subparsers(dest="what", required=True)
    p = ssub.add_parser("corpus", parents=[common], help="features, gold and model predictions")
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_synth_corpus)
    p = ssub.add_parser("birt", parents=[common], help="observation matrix with known parameters")
    p.add_argument("--bands", type=int, default=6)
    p.add_argument("--models", type=int, default=5)
    p.add_argument("--noise", choices=("none", "beta"), default="none")
    p.add_argument("--samples", type=int, default=1, help="Beta draws averaged per cell")
    p.set_defaults(func=cmd_synth_birt)

    p = sub.add_parser("train-predict", parents=[common], help="train a roster and write predictions")
    p.add_argument("--roster", help="roster JSON")
    p.add_argument("--train", required=True, help="training feature CSV")
    p.add_argument("--test", help="feature CSV to predict (default: the training file)")
    p.set_defaults(func=cmd_train_predict)

    p = sub.add_parser("fit-irt", parents=[common], help="fit the IRT model on validation predictions")
    p.add_argument("--predictions")
    p.add_argument("--gold")
    p.add_argument("--observations", help="raw observation matrix JSON instead of predictions")
    p.set_defaults(func=cmd_fit_irt)

    p = sub.add_parser("combine", parents=[common], help="combine test predictions with a fitted model")
    p.add_argument("--model", required=True, help="combiner.json from fit-irt")
    p.add_argument("--predictions", required=True)
    p.add_argument("--tiebreak", choices=("distance", "widest_last"))
    p.add_argument("--unweighted", action="store_true", help="every vote counts 1")
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("evaluate", parents=[common], help="metrics for each prediction column")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", parents=[common], help="end-to-end cross-validated experiment")
    p.add_argument("--workers", type=int)
    p.add_argument("--audit", action="store_true", help="also write audit.jsonl")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
