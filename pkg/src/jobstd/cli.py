"""Command-line entry point wiring all modules together.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import feedback as fb
from . import ranker as rk
from .features import EmbeddingError, EmbeddingTable, MarketStats, SentenceEncoder, extract
from .sampledata import (
    build_sample_embeddings,
    generate_labeled_sentences,
    generate_seed_data,
    posting_from_dict,
    posting_to_dict,
    write_sample_taxonomy,
)
from .simulate import Persona, run_simulation
from .tagger import EntityType, build_matcher, tag
from .taxonomy import TaxonomyError, load_taxonomy


class DataError(Exception):
    pass


@click.group()
def cli():
    """Job posting standardization toolkit."""


@cli.group("taxonomy")
def taxonomy_group():
    """Taxonomy utilities."""


@taxonomy_group.command("validate")
@click.argument("path", type=click.Path(exists=True))
def taxonomy_validate(path):
    """Validate a taxonomy file; exit nonzero with the first error."""
    tax = load_taxonomy(path)
    counts = {t.value: c for t, c in tax.counts().items() if c}
    click.echo(f"ok: {len(tax.entities)} entities {json.dumps(counts, sort_keys=True)}")


@cli.command("tag")
@click.option("--taxonomy", "taxonomy_path", required=True, type=click.Path(exists=True))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--type", "entity_type", required=True, type=click.Choice([t.value for t in EntityType]))
@click.option("--out", type=click.Path(), default="-")
def tag_cmd(taxonomy_path, input_path, entity_type, out):
    """Tag postings with entity mentions; emits JSON Lines."""
    tax = load_taxonomy(taxonomy_path)
    matcher = build_matcher(tax, EntityType(entity_type))
    fh = sys.stdout if out == "-" else open(out, "w", encoding="utf-8")
    try:
        with open(input_path, encoding="utf-8") as fin:
            for line in fin:
                line = line.strip()
                if not line:
                    continue
                posting = posting_from_dict(json.loads(line))
                for m in tag(matcher, posting):
                    fh.write(
                        json.dumps(
                            {
                                "posting_id": posting.posting_id,
                                "type": m.entity_type.value,
                                "entity_id": m.entity_id,
                                "field": m.field.value,
                                "start": m.token_span[0],
                                "end": m.token_span[1],
                                "surface": m.surface,
                            },
                            sort_keys=True,
                        )
                        + "\n"
                    )
    finally:
        if fh is not sys.stdout:
            fh.close()


@cli.command("features")
@click.option("--posting", "posting_path", required=True, type=click.Path(exists=True))
@click.option("--entity", "entity_spec", required=True, help="type:id, e.g. skill:s001")
@click.option("--taxonomy", "taxonomy_path", required=True, type=click.Path(exists=True))
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
def features_cmd(posting_path, entity_spec, taxonomy_path, embeddings_path):
    """Print the feature map of one (posting, entity) pair as JSON."""
    if ":" not in entity_spec:
        raise click.UsageError("--entity must be type:id")
    type_str, eid = entity_spec.split(":", 1)
    etype = EntityType(type_str)
    tax = load_taxonomy(taxonomy_path)
    table = EmbeddingTable.load(embeddings_path)
    with open(posting_path, encoding="utf-8") as fh:
        posting = posting_from_dict(json.loads(fh.readline()))
    context = []
    for t in (EntityType.SKILL, EntityType.COMPANY):
        if tax.of_type(t):
            context.extend(tag(build_matcher(tax, t), posting))
    fv = extract(posting, etype, eid, context, SentenceEncoder(table), MarketStats(), tax)
    from .features import FEATURE_NAMES

    click.echo(json.dumps(dict(zip(FEATURE_NAMES, fv.to_list())), indent=2, sort_keys=True))


@cli.command("gen-sample")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--dimension", default=32, show_default=True)
def gen_sample(out_dir, dimension):
    """Write the sample taxonomy and embeddings files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tax_path = out / "sample_taxonomy.jsonl"
    write_sample_taxonomy(tax_path)
    tax = load_taxonomy(tax_path)
    build_sample_embeddings(tax, dimension).save(out / "sample_embeddings.txt")
    click.echo(f"wrote {tax_path} and {out / 'sample_embeddings.txt'}")


@cli.command("gen-seed")
@click.option("--taxonomy", "taxonomy_path", required=True, type=click.Path(exists=True))
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
@click.option("--n", "n_postings", default=200, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
def gen_seed(taxonomy_path, embeddings_path, n_postings, seed, out_dir):
    """Generate synthetic postings plus labeled per-type training examples."""
    tax = load_taxonomy(taxonomy_path)
    table = EmbeddingTable.load(embeddings_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    postings, examples = generate_seed_data(tax, table, n_postings, seed)
    with open(out / "postings.jsonl", "w", encoding="utf-8") as fh:
        for posting, truth in postings:
            fh.write(json.dumps({**posting_to_dict(posting), "truth": truth}, sort_keys=True) + "\n")
    for etype, exs in examples.items():
        fb.save_examples(exs, out / f"examples_{etype.value}.jsonl")
    sentences, labels = generate_labeled_sentences(tax, 400, seed)
    with open(out / "sentences.jsonl", "w", encoding="utf-8") as fh:
        for s, lbl in zip(sentences, labels):
            fh.write(json.dumps({"sentence": s, "label": lbl}, sort_keys=True) + "\n")
    click.echo(f"wrote {n_postings} postings and seed examples to {out}")


@cli.command("train")
@click.option("--kind", required=True, type=click.Choice(["linear", "gbdt", "question"]))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--embeddings", "embeddings_path", type=click.Path(exists=True), help="required for --kind question")
@click.option("--epochs", default=500, show_default=True)
@click.option("--learning-rate", default=0.1, show_default=True)
@click.option("--l2", default=1e-4, show_default=True)
@click.option("--num-trees", default=100, show_default=True)
@click.option("--max-depth", default=3, show_default=True)
@click.option("--min-leaf", default=5, show_default=True)
def train_cmd(kind, data_path, out_path, embeddings_path, epochs, learning_rate, l2, num_trees, max_depth, min_leaf):
    """Train a model and write it as versioned JSON."""
    if kind == "question":
        if not embeddings_path:
            raise click.UsageError("--kind question requires --embeddings")
        table = EmbeddingTable.load(embeddings_path)
        sentences, labels = [], []
        with open(data_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    obj = json.loads(line)
                    sentences.append(obj["sentence"])
                    labels.append(obj["label"])
        clf, encoder = rk.train_question_classifier(sentences, labels, table, epochs=epochs)
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(rk.question_model_to_dict(clf, encoder), fh, sort_keys=True)
            fh.write("\n")
        click.echo(f"trained question classifier ({len(clf.classes)} classes) -> {out_path}")
        return
    data = fb.load_examples(data_path)
    if kind == "linear":
        model = rk.train_linear(data, epochs=epochs, learning_rate=learning_rate, l2=l2)
    else:
        model = rk.train_gbdt(
            data, num_trees=num_trees, max_depth=max_depth, learning_rate=learning_rate, min_leaf=min_leaf
        )
    rk.save_model(model, out_path)
    click.echo(f"trained {kind} model on {len(data)} examples -> {out_path}")


@cli.command("evaluate")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, default=False)
@click.option("--k", default=10, show_default=True)
def evaluate_cmd(model_path, data_path, as_json, k):
    """Report log_loss, accuracy, auc, precision_at_k on a labeled file."""
    model = rk.load_model(model_path)
    data = fb.load_examples(data_path)
    metrics = rk.evaluate(model, data, k=k)
    if as_json:
        click.echo(json.dumps(metrics, sort_keys=True))
    else:
        for name, value in sorted(metrics.items()):
            click.echo(f"{name}: {value:.6f}")


@cli.group("feedback")
def feedback_group():
    """Feedback log utilities."""


@feedback_group.command("stats")
@click.argument("log_path", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, default=False)
def feedback_stats(log_path, as_json):
    """Aggregate an event log into market stats."""
    events = fb.EventLog(log_path).read_all()
    stats = fb.aggregate(events)
    summary = {
        "events": len(events),
        "accepted_total": stats.total,
        "distinct_pairs": stats.vocabulary_size,
        "tracked_keys": len(stats.acceptance),
    }
    if as_json:
        click.echo(json.dumps(summary, sort_keys=True))
    else:
        for name, value in sorted(summary.items()):
            click.echo(f"{name}: {value}")


@cli.command("retrain")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--seed", "seed_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--entity-type", default="skill", type=click.Choice([t.value for t in EntityType]))
@click.option("--previous-version", default=1, show_default=True)
def retrain_cmd(log_path, seed_path, config_path, out_dir, entity_type, previous_version):
    """Retrain on seed plus feedback data; writes versioned artifacts."""
    config = fb.RetrainConfig()
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            for key, value in json.load(fh).items():
                if not hasattr(config, key):
                    raise DataError(f"unknown retrain config key {key!r}")
                setattr(config, key, value)
    log = fb.EventLog(log_path)
    seed_data = fb.load_examples(seed_path)
    model, stats, model_path, stats_path = fb.retrain(
        log, seed_data, config, out_dir,
        entity_type=EntityType(entity_type), previous_version=previous_version,
    )
    click.echo(f"wrote {model_path} and {stats_path}")


@cli.command("simulate-feedback")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--persona", "persona_path", required=True, type=click.Path(exists=True))
@click.option("--rounds", default=500, show_default=True)
@click.option("--taxonomy", "taxonomy_path", required=True, type=click.Path(exists=True))
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=13, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def simulate_cmd(model_path, persona_path, rounds, taxonomy_path, embeddings_path, seed, out_path):
    """Run the closed-loop persona simulation, producing a synthetic log."""
    tax = load_taxonomy(taxonomy_path)
    table = EmbeddingTable.load(embeddings_path)
    model = rk.load_model(model_path)
    persona = Persona.load(persona_path)
    log = run_simulation(tax, table, model, persona, rounds, seed, out_path)
    click.echo(f"wrote {len(log)} events to {out_path}")


@cli.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve_cmd(config_path, port, host):
    """Start the HTTP API."""
    import uvicorn

    from .service import ServiceConfig, StandardizeService, create_app

    service = StandardizeService(ServiceConfig.load(config_path))
    uvicorn.run(create_app(service), host=host, port=port, log_level="warning")


@cli.command("stream")
@click.option("--in", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "output_path", required=True, type=click.Path())
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def stream_cmd(input_path, output_path, config_path):
    """Batch-standardize a postings file, one JSON line per posting."""
    from .service import ServiceConfig, StandardizeService, stream_process

    service = StandardizeService(ServiceConfig.load(config_path))
    summary = stream_process(input_path, output_path, service)
    click.echo(json.dumps(summary, sort_keys=True))


_DATA_ERRORS = (
    DataError,
    TaxonomyError,
    EmbeddingError,
    rk.DegenerateData,
    rk.SchemaMismatch,
    fb.InvalidEvent,
    json.JSONDecodeError,
    FileNotFoundError,
    KeyError,
)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
