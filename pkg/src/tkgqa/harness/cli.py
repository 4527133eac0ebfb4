"""Command-line interface.

Subcommands:

* ``generate-data``  write a synthetic KG + question splits to a directory
* ``train-kg``       pre-train the complex KG embedding tables
* ``train-qa``       train the QA model on top of pre-trained tables
* ``eval``           evaluate a model checkpoint (table + JSON report,
                     optional per-question predictions JSONL)
* ``ablate``         train and evaluate the component-ablation variants
* ``select-spo``     debug: ranked candidate facts for one question, with
                     optional attention/gate dump from a model checkpoint

Every subcommand takes ``--config`` (JSON, defaults apply when omitted)
and ``--seed``; hard errors exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..config import PipelineConfig, load_config
from ..encoders import get_encoder
from ..errors import InputError, TkgqaError
from ..kg import TemporalKG, load_kg, save_kg
from ..selector import build_candidate_pool, select_spos
from ..tcomplex import TkgTrainConfig, load_tables, save_tables, train_tkg
from .ablation import ABLATION_FLAGS, ablate
from .data import QuestionInstance, load_questions, save_questions
from .metrics import evaluate
from .model import QaModel, init_qa_params
from .synth import dataset_fingerprint, generate_synthetic
from .training import load_checkpoint, save_checkpoint, train_qa

logger = logging.getLogger(__name__)


def _encoder_from_config(cfg: PipelineConfig):
    return get_encoder(
        backend=cfg.encoder.backend, d_txt=cfg.encoder.d_txt,
        seed=cfg.encoder.seed, model_id=cfg.encoder.model_id,
    )


def _load_data_dir(data_dir: Path) -> TemporalKG:
    return load_kg(
        data_dir / "facts.tsv",
        entities_path=data_dir / "entities.tsv",
        predicates_path=data_dir / "predicates.tsv",
    )


def _load_split(data_dir: Path, kg: TemporalKG, split: str) -> list[QuestionInstance]:
    path = data_dir / f"{split}.json"
    if not path.exists():
        raise InputError(f"no {split}.json in {data_dir}")
    instances, errors = load_questions(path, kg)
    for err in errors:
        logger.warning("dropped record %s (%s): %s", err.index, err.question_id, err.message)
    return instances


def cmd_generate_data(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    ds = generate_synthetic(cfg.synth, seed=seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_kg(ds.kg, out / "facts.tsv", out / "entities.tsv", out / "predicates.tsv")
    for name, split in (("train", ds.train), ("valid", ds.valid), ("test", ds.test)):
        save_questions(split, out / f"{name}.json", ds.kg)
    manifest = {
        "seed": seed,
        "fingerprint": dataset_fingerprint(ds),
        "config": cfg.to_dict(),
        "sizes": {"entities": ds.kg.num_entities, "predicates": ds.kg.num_predicates,
                  "timestamps": ds.kg.num_timestamps, "facts": len(ds.kg.facts),
                  "train": len(ds.train), "valid": len(ds.valid), "test": len(ds.test)},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    print(f"wrote {out}: {manifest['sizes']}")
    return 0


def cmd_train_kg(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    kg = _load_data_dir(Path(args.data))
    tcfg = TkgTrainConfig(
        d_kg=cfg.kg.d_kg, epochs=cfg.kg.epochs, lr=cfg.kg.lr,
        batch_size=cfg.kg.batch_size, l2=cfg.kg.l2, init_scale=cfg.kg.init_scale,
        seed=seed,
    )
    emb = train_tkg(kg, tcfg)
    save_tables(args.out, emb, extra={"seed": seed})
    from ..tcomplex import expand_training_tuples, object_hits_at_1

    hits = object_hits_at_1(emb, expand_training_tuples(kg))
    print(f"trained tables d_kg={emb.d_kg} on {len(kg.facts)} facts; "
          f"object hits@1 on training tuples: {hits:.3f}; saved to {args.out}")
    return 0


def cmd_train_qa(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    data_dir = Path(args.data)
    kg = _load_data_dir(data_dir)
    emb, _ = load_tables(args.checkpoint)
    encoder = _encoder_from_config(cfg)
    train_set = _load_split(data_dir, kg, "train")
    valid_set = _load_split(data_dir, kg, "valid")
    qa = init_qa_params(
        d_txt=encoder.d_txt, d_kg=emb.d_kg, seed=seed,
        branches=cfg.fusion.branches, share_directions=cfg.fusion.share_directions,
    )
    model = QaModel(kg, emb, encoder, qa, cfg.fusion)
    result = train_qa(model, train_set, valid_set, cfg.training, seed=seed)
    save_checkpoint(args.out, model, cfg)
    print(f"trained {len(result.history)} epochs; best valid hits@1 "
          f"{result.best_valid_hits1:.3f} at epoch {result.best_epoch}; saved to {args.out}")
    return 0


def _prediction_record(pred, kg: TemporalKG) -> dict:
    answers = []
    for (kind, idx), score in zip(pred.top, pred.top_scores):
        name = kg.entities[idx] if kind == "entity" else kg.year_of(idx)
        answers.append({"kind": kind, "id": idx, "name": name, "score": score})
    return {
        "question_id": pred.question_id,
        "rank_of_best_gold": pred.rank,
        "answers": answers,
        "gate_mean": pred.gate_mean,
        "fusion_skipped": pred.fusion_skipped,
        "selected_spo_ids": pred.selected_facts,
    }


def cmd_eval(args) -> int:
    emb, qa, ckpt_cfg = load_checkpoint(args.checkpoint)
    cfg = load_config(args.config) if args.config else ckpt_cfg
    data_dir = Path(args.data)
    kg = _load_data_dir(data_dir)
    encoder = _encoder_from_config(cfg)
    split = args.split or cfg.eval.split
    questions = _load_split(data_dir, kg, split)
    model = QaModel(kg, emb, encoder, qa, cfg.fusion)
    report, predictions = evaluate(model, questions, ks=tuple(cfg.eval.hits_ks),
                                   top_k=cfg.eval.top_k)
    print(report.format_table())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
        print(f"report written to {args.out}")
    if args.predictions:
        with open(args.predictions, "w", encoding="utf-8") as fh:
            for pred in predictions:
                fh.write(json.dumps(_prediction_record(pred, kg), sort_keys=True) + "\n")
        print(f"predictions written to {args.predictions}")
    return 0


def cmd_ablate(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    data_dir = Path(args.data)
    kg = _load_data_dir(data_dir)
    emb, _ = load_tables(args.checkpoint)
    encoder = _encoder_from_config(cfg)
    from .synth import SyntheticDataset

    dataset = SyntheticDataset(
        kg=kg,
        train=_load_split(data_dir, kg, "train"),
        valid=_load_split(data_dir, kg, "valid"),
        test=_load_split(data_dir, kg, "test"),
    )
    flags = tuple(args.flags.split(",")) if args.flags else ABLATION_FLAGS
    reports = ablate(dataset, emb, encoder, cfg, flags=flags, seed=seed)
    doc = {}
    for label, report in reports.items():
        print(f"\n== {label} ==")
        print(report.format_table())
        doc[label] = report.to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        print(f"\nablation reports written to {args.out}")
    return 0


def cmd_select_spo(args) -> int:
    cfg = load_config(args.config)
    data_dir = Path(args.data)
    kg = _load_data_dir(data_dir)
    encoder = _encoder_from_config(cfg)

    instance = None
    if args.id:
        if not args.questions:
            raise InputError("--id requires --questions FILE")
        instances, _ = load_questions(args.questions, kg)
        matches = [q for q in instances if q.id == args.id]
        if not matches:
            raise InputError(f"question id {args.id!r} not found in {args.questions}")
        instance = matches[0]
        text = instance.text
        entity_ids = {
            e for e in (instance.annotations.subject_entity,
                        instance.annotations.object_entity) if e is not None
        }
    elif args.question:
        text = args.question
        names = [n.strip() for n in (args.entities or "").split(",") if n.strip()]
        if not names:
            raise InputError("--question requires --entities name[,name...]")
        entity_ids = {kg.entity_id_of(n) for n in names}
    else:
        raise InputError("give either --id with --questions, or --question with --entities")

    tm = encoder.encode(text)
    pool = build_candidate_pool(kg, entity_ids, encoder, cap=cfg.fusion.pool_cap)
    selection = select_spos(tm, pool, k=cfg.fusion.k_spo)
    print(f"question: {text}")
    print(f"pool size: {selection.pool_size}; selected m={selection.m} (k={selection.k})")
    for rank, cand in enumerate(selection.selected, start=1):
        print(f"{rank:3d}. score={cand.score:+.4f}  {cand.text}")

    if args.dump_fusion:
        if not args.checkpoint:
            raise InputError("--dump-fusion requires a model --checkpoint")
        if instance is None:
            raise InputError("--dump-fusion requires --id/--questions (needs annotations)")
        emb, qa, ckpt_cfg = load_checkpoint(args.checkpoint)
        model = QaModel(kg, emb, encoder, qa, ckpt_cfg.fusion)
        doc = model.inspect_question(instance)
        doc["selected_spo_texts"] = [c.text for c in selection.selected]
        Path(args.dump_fusion).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        print(f"fusion dump written to {args.dump_fusion}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tkgqa",
        description="temporal KG question answering: data, training, evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=False, out=None, data=True):
        p.add_argument("--config", help="JSON config file (defaults when omitted)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if data:
            p.add_argument("--data", required=True, help="data directory")
        if checkpoint:
            p.add_argument("--checkpoint", required=True, help="input checkpoint (npz)")
        if out == "required":
            p.add_argument("--out", required=True, help="output path")
        elif out == "optional":
            p.add_argument("--out", help="output path")

    p = sub.add_parser("generate-data", help="write a synthetic benchmark")
    common(p, out="required", data=False)
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train-kg", help="pre-train KG embedding tables")
    common(p, out="required")
    p.set_defaults(func=cmd_train_kg)

    p = sub.add_parser("train-qa", help="train the QA model")
    common(p, checkpoint=True, out="required")
    p.set_defaults(func=cmd_train_qa)

    p = sub.add_parser("eval", help="evaluate a model checkpoint")
    common(p, checkpoint=True, out="optional")
    p.add_argument("--split", choices=("train", "valid", "test"))
    p.add_argument("--predictions", help="write per-question JSONL here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and evaluate ablation variants")
    common(p, checkpoint=True, out="optional")
    p.add_argument("--flags", help=f"comma list from {', '.join(ABLATION_FLAGS)}")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("select-spo", help="debug: ranked candidate facts")
    common(p)
    p.add_argument("--question", help="raw question text")
    p.add_argument("--entities", help="comma-separated entity names for --question")
    p.add_argument("--questions", help="question JSON file for --id")
    p.add_argument("--id", help="question id inside --questions")
    p.add_argument("--checkpoint", help="model checkpoint for --dump-fusion")
    p.add_argument("--dump-fusion", help="write attention maps and gates to this JSON file")
    p.set_defaults(func=cmd_select_spo)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TkgqaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
