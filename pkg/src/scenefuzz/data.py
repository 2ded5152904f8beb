"""Bundled data files: object databases, deny lists, paraphrase sets."""

from __future__ import annotations

from pathlib import Path

from .generate import DenyList, ParaphraseSet, load_deny_list, load_paraphrases
from .scene import ObjectDatabase, load_object_db

DATA_DIR = Path(__file__).parent / "data"


def data_path(name: str) -> Path:
    return DATA_DIR / name


def seen_db() -> ObjectDatabase:
    return load_object_db(data_path("objects_seen.json"))


def unseen_db() -> ObjectDatabase:
    return load_object_db(data_path("objects_unseen.json"))


def deny_list_for(db: ObjectDatabase) -> DenyList:
    """Pick the deny list matching the database's pool."""
    counts = db.pool_counts()
    name = "deny_unseen.json" if counts.get("unseen", 0) >= counts.get("seen", 0) else "deny_seen.json"
    return load_deny_list(data_path(name), db)


def default_paraphrases() -> ParaphraseSet:
    return load_paraphrases(data_path("paraphrases.json"))
