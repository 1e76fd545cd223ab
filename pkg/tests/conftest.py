import json
from pathlib import Path

import pytest

from jobstd.ranker import (
    question_model_to_dict,
    save_model,
    train_gbdt,
    train_linear,
    train_question_classifier,
)
from jobstd.sampledata import ensure_sample_data, generate_labeled_sentences, generate_seed_data
from jobstd.service import ServiceConfig, StandardizeService
from jobstd.taxonomy import EntityType

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def sample_data():
    taxonomy, table = ensure_sample_data(DATA_DIR)
    return taxonomy, table


@pytest.fixture(scope="session")
def taxonomy(sample_data):
    return sample_data[0]


@pytest.fixture(scope="session")
def table(sample_data):
    return sample_data[1]


@pytest.fixture(scope="session")
def seed_corpus(sample_data):
    taxonomy, table = sample_data
    return generate_seed_data(taxonomy, table, 100, seed=7)


@pytest.fixture(scope="session")
def trained_models_dir(tmp_path_factory, sample_data, seed_corpus):
    taxonomy, table = sample_data
    _, examples = seed_corpus
    models = tmp_path_factory.mktemp("models")
    for t in (EntityType.TITLE, EntityType.SKILL, EntityType.COMPANY):
        save_model(train_linear(examples[t]), models / f"{t.value}_v1.json")
    save_model(train_gbdt(examples[EntityType.QUESTION_TYPE], num_trees=30), models / "question_type_v1.json")
    sentences, labels = generate_labeled_sentences(taxonomy, 300, seed=3)
    clf, enc = train_question_classifier(sentences, labels, table)
    (models / "question_classifier_v1.json").write_text(
        json.dumps(question_model_to_dict(clf, enc), sort_keys=True) + "\n"
    )
    return models


def make_service(tmp_path, models_dir) -> StandardizeService:
    cfg = ServiceConfig(
        taxonomy_path=str(DATA_DIR / "sample_taxonomy.jsonl"),
        embeddings_path=str(DATA_DIR / "sample_embeddings.txt"),
        models_dir=str(models_dir),
        event_log_path=str(tmp_path / "events.jsonl"),
        snapshot_store_path=str(tmp_path / "snapshots.jsonl"),
    )
    return StandardizeService(cfg)


@pytest.fixture()
def service(tmp_path, trained_models_dir):
    return make_service(tmp_path, trained_models_dir)
