"""Manifest files: TSV tables tying audio, alignments, speakers, and
augmentation provenance together."""

import csv

from .errors import ManifestError

CORE_COLUMNS = ["audio_path", "alignment_path", "speaker_id", "utterance_id", "is_oral"]
AUG_COLUMNS = ["aug_type", "aug_param", "aug_seed"]


def _parse_bool(value):
    value = value.strip().lower()
    if value in ("1", "true", "yes", "y"):
        return True
    if value in ("0", "false", "no", "n", ""):
        return False
    raise ManifestError(f"not a boolean: {value!r}")


def read_manifest(path):
    """Read a tab-separated manifest with a header row into a list of dicts."""
    rows = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader((line for line in fh if not line.startswith("#")), delimiter="\t")
        if reader.fieldnames is None:
            raise ManifestError(f"{path}: empty manifest")
        missing = {"audio_path", "speaker_id", "utterance_id"} - set(reader.fieldnames)
        if missing:
            raise ManifestError(f"{path}: missing columns {sorted(missing)}")
        for lineno, raw in enumerate(reader, start=2):
            row = {
                "audio_path": raw["audio_path"].strip(),
                "alignment_path": (raw.get("alignment_path") or "").strip(),
                "speaker_id": raw["speaker_id"].strip(),
                "utterance_id": raw["utterance_id"].strip(),
                "is_oral": _parse_bool(raw.get("is_oral") or "true"),
                "aug_type": (raw.get("aug_type") or "none").strip() or "none",
                "aug_param": (raw.get("aug_param") or "").strip(),
                "aug_seed": int(raw.get("aug_seed") or 0),
            }
            key = (row["speaker_id"], row["utterance_id"], row["aug_type"], row["aug_param"])
            if key in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate row {key}")
            seen.add(key)
            rows.append(row)
    return rows


def write_manifest(path, rows, header_comment=None):
    columns = CORE_COLUMNS + AUG_COLUMNS
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            for line in header_comment.splitlines():
                fh.write(f"# {line}\n")
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [
                    row["audio_path"],
                    row.get("alignment_path", ""),
                    row["speaker_id"],
                    row["utterance_id"],
                    "true" if row.get("is_oral", True) else "false",
                    row.get("aug_type", "none"),
                    row.get("aug_param", ""),
                    row.get("aug_seed", 0),
                ]
            )


def is_original(row):
    return row.get("aug_type", "none") in ("", "none")
