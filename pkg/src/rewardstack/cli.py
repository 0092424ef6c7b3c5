"""Batch command-line entry points: score, build-dataset, grpo-step.

Every command is a pure function of its inputs, config and fixtures:
repeated runs write byte-identical outputs. Reports always echo the
version and the effective config.
"""

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .aggregation import ScoringContext, score_group
from .config import ConfigError, KitConfig
from .dataset import (
    SrtParseError,
    build_sessions,
    parse_srt,
    split_by_session,
    split_turns,
)
from .embeddings import (
    CachingEmbeddingProvider,
    FileEmbeddingProvider,
    FileFrameStore,
    HashEmbeddingProvider,
    RemoteConfig,
    RemoteEmbeddingProvider,
    load_frame_embeddings,
)
from .grpo import GrpoStats, TokenLogProbs, grpo_stats
from .pcg import (
    FileLikelihoodProvider,
    HashLikelihoodProvider,
    RemoteLikelihoodProvider,
)

SAMPLE_FIELDS = (
    "session_id",
    "film_id",
    "user_role",
    "assistant_role",
    "history",
    "target",
    "clip_start",
    "clip_end",
)


def _read_jsonl(path: Path) -> list[dict]:
    records = []
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{n}: invalid JSON: {exc}") from exc
    return records


def _write_jsonl(path: Path, records: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True))
            handle.write("\n")


def _write_report(path: Path, report: dict, cfg: KitConfig) -> None:
    report = {"version": __version__, "config": cfg.to_dict(), **report}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _embedding_provider(cfg: KitConfig):
    if cfg.embed_endpoint:
        remote = RemoteEmbeddingProvider(
            RemoteConfig(
                endpoint=cfg.embed_endpoint,
                timeout=cfg.request_timeout,
                retries=cfg.request_retries,
                max_in_flight=cfg.max_in_flight,
            )
        )
        return CachingEmbeddingProvider(remote)
    if cfg.embed_fixtures:
        return FileEmbeddingProvider(cfg.embed_fixtures)
    return HashEmbeddingProvider(dim=cfg.embed_dim)


def _likelihood_provider(cfg: KitConfig):
    if cfg.gtll_endpoint:
        return RemoteLikelihoodProvider(
            cfg.gtll_endpoint, timeout=cfg.request_timeout, retries=cfg.request_retries
        )
    if cfg.gtll_fixtures:
        return FileLikelihoodProvider(cfg.gtll_fixtures)
    return HashLikelihoodProvider()


def cmd_score(args) -> int:
    cfg = KitConfig.load(args.config, overrides={"variant": args.variant})
    records = _read_jsonl(Path(args.input))
    store = FileFrameStore(args.frames)
    ctx = ScoringContext(
        embedding_provider=_embedding_provider(cfg),
        likelihood_provider=_likelihood_provider(cfg),
        alignment=cfg.alignment(),
        thresholds=cfg.thresholds(),
        weights=cfg.weights(),
        zscore_eps=cfg.zscore_eps,
    )

    def process(record: dict) -> dict:
        for key in ("sample_id", "clip_id", "reference", "completions"):
            if key not in record:
                raise ValueError(f"record missing {key!r}")
        completions = record["completions"]
        if len(completions) < 2:
            raise ValueError(f"group too small: need G >= 2, got {len(completions)}")
        if cfg.group_size is not None and len(completions) != cfg.group_size:
            raise ValueError(
                f"group size {len(completions)} != configured group_size {cfg.group_size}"
            )
        frames = load_frame_embeddings(record["clip_id"], store)
        batch = score_group(
            completions,
            record["reference"],
            frames,
            ctx,
            prompt_context=record.get("context", ""),
        )
        return {
            "sample_id": record["sample_id"],
            "raw": [list(r.as_array()) for r in batch.rewards],
            "normalized": batch.normalized.tolist(),
            "advantages": batch.advantages.tolist(),
        }

    outputs: list[dict] = []
    errors: list[dict] = []

    def safely(indexed: tuple[int, dict]):
        position, record = indexed
        try:
            return position, process(record), None
        except Exception as exc:
            return position, None, f"{exc}"

    if args.strict:
        results = []
        for item in enumerate(records):
            results.append(safely(item))
            if results[-1][2] is not None:
                break
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(safely, enumerate(records)))

    for position, output, error in results:
        if error is None:
            outputs.append(output)
        else:
            errors.append({"record": position, "sample_id": records[position].get("sample_id"), "error": error})

    out_path = Path(args.out)
    _write_jsonl(out_path, outputs)
    _write_report(
        out_path.with_suffix(out_path.suffix + ".report.json"),
        {"records": len(records), "scored": len(outputs), "errors": errors},
        cfg,
    )
    for err in errors:
        print(f"error: record {err['record']} ({err['sample_id']}): {err['error']}", file=sys.stderr)
    print(f"scored {len(outputs)}/{len(records)} records -> {out_path}")
    return 0 if not errors else 1


def _line_dict(line) -> dict:
    return {"speaker": line.speaker, "text": line.text, "start": line.start, "end": line.end}


def _sample_dict(sample) -> dict:
    return {
        "session_id": sample.session_id,
        "film_id": sample.film_id,
        "user_role": sample.user_role,
        "assistant_role": sample.assistant_role,
        "history": [_line_dict(line) for line in sample.history],
        "target": _line_dict(sample.target),
        "clip_start": sample.clip_start,
        "clip_end": sample.clip_end,
    }


def cmd_build_dataset(args) -> int:
    cfg = KitConfig.load(args.config)
    srt_dir = Path(args.srt_dir)
    roles = json.loads(Path(args.roles).read_text(encoding="utf-8"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    warnings = 0
    samples: list[dict] = []
    film_ids = sorted(roles)
    for film_id in film_ids:
        srt_path = srt_dir / f"{film_id}.srt"
        if not srt_path.is_file():
            raise FileNotFoundError(f"no subtitle file for film {film_id!r}: {srt_path}")
        overrides = None
        sidecar = srt_dir / f"{film_id}.speakers.json"
        if sidecar.is_file():
            payload = json.loads(sidecar.read_text(encoding="utf-8"))
            overrides = {int(k): str(v) for k, v in payload.items()}
        parsed = parse_srt(srt_path.read_text(encoding="utf-8"), speaker_overrides=overrides)
        warnings += parsed.warnings

        pairs = roles[film_id]
        if pairs and isinstance(pairs[0], str):
            pairs = [pairs]
        for user_role, assistant_role in pairs:
            sessions = build_sessions(
                parsed.lines,
                film_id=film_id,
                user_role=user_role,
                assistant_role=assistant_role,
                tau_turn=cfg.tau_turn,
                tau_round=cfg.tau_round,
            )
            for session in sessions:
                samples.extend(_sample_dict(s) for s in split_turns(session))

    if args.augmented:
        for record in _read_jsonl(Path(args.augmented)):
            if not record.get("session_id"):
                warnings += 1
                continue
            missing = [key for key in SAMPLE_FIELDS if key not in record]
            if missing:
                warnings += 1
                continue
            samples.append({key: record[key] for key in SAMPLE_FIELDS})

    session_ids = {s["session_id"] for s in samples}
    split_skipped = len(session_ids) < 2
    if split_skipped:
        train, test = list(samples), []
        if not samples:
            print("warning: zero sessions produced", file=sys.stderr)
    else:
        train, test = split_by_session(
            samples, args.test_fraction, args.seed, session_id_of=lambda s: s["session_id"]
        )

    _write_jsonl(out_dir / "samples.jsonl", samples)
    _write_jsonl(out_dir / "train.jsonl", train)
    _write_jsonl(out_dir / "test.jsonl", test)
    overlap = len({s["session_id"] for s in train} & {s["session_id"] for s in test})
    _write_report(
        out_dir / "manifest.json",
        {
            "films": len(film_ids),
            "sessions": len(session_ids),
            "samples": len(samples),
            "warnings": warnings,
            "train_samples": len(train),
            "test_samples": len(test),
            "overlap": overlap,
            "seed": args.seed,
            "test_fraction": args.test_fraction,
            "split_skipped": split_skipped,
        },
        cfg,
    )
    print(f"built {len(samples)} samples from {len(film_ids)} films -> {out_dir}")
    return 0


def cmd_grpo_step(args) -> int:
    cfg = KitConfig.load(args.config)
    grpo_cfg = cfg.grpo()
    logprob_records = _read_jsonl(Path(args.logprobs))
    advantage_records = _read_jsonl(Path(args.advantages))

    advantages_by_sample: dict[str, list[float]] = {}
    for record in advantage_records:
        advantages_by_sample[record["sample_id"]] = [float(a) for a in record["advantages"]]

    groups: dict[str, list[tuple[int, TokenLogProbs]]] = {}
    order: list[str] = []
    for record in logprob_records:
        sample_id = record["sample_id"]
        g = int(record["g"])
        seq = TokenLogProbs(
            new_lp=record["new_lp"], old_lp=record["old_lp"], ref_lp=record["ref_lp"]
        )
        if sample_id not in groups:
            groups[sample_id] = []
            order.append(sample_id)
        groups[sample_id].append((g, seq))

    per_group: list[GrpoStats] = []
    for sample_id in order:
        if sample_id not in advantages_by_sample:
            raise ValueError(f"join mismatch: sample {sample_id!r} has no advantages record")
        advantage_list = advantages_by_sample[sample_id]
        members = sorted(groups[sample_id])
        for g, _ in members:
            if not 0 <= g < len(advantage_list):
                raise ValueError(
                    f"join mismatch: sample {sample_id!r} g={g} outside advantages[{len(advantage_list)}]"
                )
        per_group.append(
            grpo_stats(
                [seq for _, seq in members],
                [advantage_list[g] for g, _ in members],
                grpo_cfg,
            )
        )

    if not per_group:
        raise ValueError("no log-prob records to score")
    total_tokens = sum(s.tokens for s in per_group)
    report = {
        "loss": sum(s.loss for s in per_group) / len(per_group),
        "mean_kl": sum(s.mean_kl * s.tokens for s in per_group) / total_tokens,
        "clip_fraction": sum(s.clip_fraction * s.tokens for s in per_group) / total_tokens,
        "groups": len(per_group),
        "sequences": sum(s.sequences for s in per_group),
        "tokens": total_tokens,
    }
    _write_report(Path(args.out), report, cfg)
    print(
        f"loss {report['loss']:.6f}  mean_kl {report['mean_kl']:.6f}  "
        f"clip_fraction {report['clip_fraction']:.6f}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rewardstack",
        description="Structured-completion reward scoring, dataset building, and GRPO loss reporting.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    score = sub.add_parser("score", help="score completion groups from a JSONL file")
    score.add_argument("--input", required=True, help="JSONL of {sample_id, clip_id, reference, completions}")
    score.add_argument("--frames", required=True, help="directory of per-clip frame-embedding JSON files")
    score.add_argument("--config", default=None, help="flat JSON config file")
    score.add_argument("--out", required=True, help="output JSONL path")
    score.add_argument("--strict", action="store_true", help="stop at the first record error")
    score.add_argument("--variant", choices=["max", "sent_topk"], default=None, help="override the visual variant")
    score.set_defaults(func=cmd_score)

    build = sub.add_parser("build-dataset", help="build dialogue samples from .srt files")
    build.add_argument("--srt-dir", required=True, help="directory of {film_id}.srt files")
    build.add_argument("--roles", required=True, help="JSON mapping film_id to (user, assistant) role pairs")
    build.add_argument("--out", required=True, help="output directory")
    build.add_argument("--seed", type=int, default=0)
    build.add_argument("--test-fraction", type=float, default=0.2)
    build.add_argument("--config", default=None)
    build.add_argument("--augmented", default=None, help="optional JSONL of externally generated samples")
    build.set_defaults(func=cmd_build_dataset)

    step = sub.add_parser("grpo-step", help="compute the GRPO loss over a log-prob file")
    step.add_argument("--logprobs", required=True, help="JSONL of {sample_id, g, new_lp, old_lp, ref_lp}")
    step.add_argument("--advantages", required=True, help="JSONL of {sample_id, advantages: [...]}")
    step.add_argument("--config", default=None, help="must set clip_eps and kl_beta")
    step.add_argument("--out", required=True, help="report JSON path")
    step.set_defaults(func=cmd_grpo_step)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SrtParseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
