"""Patent corpus ingestion: parsing, admission filtering, section pools,
deterministic splits, and word-count statistics.

Input is either a minimal patent XML subset (patent-document elements with
invention-title, abstract, description, claims, and main-classification
children) or JSONL with one document object per line. The title-abstract
section is the title text, a single space, then the abstract text.
"""

from __future__ import annotations

import json
import xml.parsers.expat
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .textprep import tokenize
from .util import round_half_up

POOL_KINDS = ("all_sections", "title_abstract", "description", "claims", "per_section_y")
SECTIONS = ("title_abstract", "description", "claims")

SPLIT_RATIOS = (Fraction(8, 10), Fraction(1, 10), Fraction(1, 10))


class CorpusParseError(Exception):
    """Malformed container; carries the byte offset of the failure."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class IpcSubclass:
    """4-character IPC sub-class code: section letter, class digits, subclass letter."""

    code: str

    def __post_init__(self):
        c = self.code
        if not (
            len(c) == 4
            and "A" <= c[0] <= "H"
            and c[1].isdigit()
            and c[2].isdigit()
            and "A" <= c[3] <= "Z"
        ):
            raise ValueError(f"invalid IPC sub-class code {self.code!r}")

    @classmethod
    def parse(cls, raw: str) -> "IpcSubclass":
        """Parse a main-classification string, truncating deeper codes to 4 chars."""
        return cls(raw.strip()[:4])

    def __str__(self) -> str:
        return self.code


@dataclass
class RawPatentRecord:
    """One parsed document before admission filtering; label is the raw tag text
    (None when the main-classification tag was absent)."""

    doc_id: str
    title_abstract: str
    description: str
    claims: str
    label: str | None

    @property
    def unlabeled(self) -> bool:
        return self.label is None


@dataclass
class PatentDocument:
    doc_id: str
    title_abstract: str
    description: str
    claims: str
    main_label: IpcSubclass

    def section(self, name: str) -> str:
        if name not in SECTIONS:
            raise KeyError(f"unknown section {name!r}")
        return getattr(self, name)


@dataclass
class SectionPool:
    """One derived corpus: per doc either a single text or the section triple."""

    kind: str
    documents: list  # [(doc_id, text)] or [(doc_id, (ta, desc, claims))]

    def __len__(self) -> int:
        return len(self.documents)


@dataclass
class SplitManifest:
    seed: int
    train: list[str]
    validation: list[str]
    test: list[str]

    def to_json(self) -> str:
        payload = {"seed": self.seed, "train": self.train, "validation": self.validation, "test": self.test}
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        d = json.loads(text)
        return cls(seed=int(d["seed"]), train=list(d["train"]),
                   validation=list(d["validation"]), test=list(d["test"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "SplitManifest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


@dataclass
class SectionStats:
    """Per-section min/max/mean token counts; mean kept as an exact rational."""

    per_section: dict[str, tuple[int, int, Fraction]] = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["section,min_words,max_words,mean_words"]
        for section in SECTIONS:
            lo, hi, mean = self.per_section[section]
            mean_2dp = round_half_up(mean, 2)
            lines.append(f"{section},{lo},{hi},{float(mean_2dp):.2f}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parsing

_XML_TEXT_TAGS = ("invention-title", "abstract", "description", "claims", "main-classification")


class _PatentXmlHandler:
    """Expat handlers collecting the minimal tag subset; unknown tags ignored."""

    def __init__(self):
        self.records: list[RawPatentRecord] = []
        self._fields: dict[str, str] | None = None
        self._doc_id = ""
        self._capture: str | None = None
        self._buffer: list[str] = []

    def start(self, name, attrs):
        if name == "patent-document":
            self._fields = {}
            self._doc_id = attrs.get("ucid", "")
        elif self._fields is not None and name in _XML_TEXT_TAGS:
            self._capture = name
            self._buffer = []

    def chars(self, data):
        if self._capture is not None:
            self._buffer.append(data)

    def end(self, name):
        if self._capture is not None and name == self._capture:
            self._fields[name] = "".join(self._buffer).strip()
            self._capture = None
        elif name == "patent-document" and self._fields is not None:
            f = self._fields
            title = f.get("invention-title", "")
            abstract = f.get("abstract", "")
            self.records.append(
                RawPatentRecord(
                    doc_id=self._doc_id,
                    title_abstract=(title + " " + abstract).strip() if (title or abstract) else "",
                    description=f.get("description", ""),
                    claims=f.get("claims", ""),
                    label=f.get("main-classification") if "main-classification" in f else None,
                )
            )
            self._fields = None


def _parse_xml(data: bytes) -> list[RawPatentRecord]:
    handler = _PatentXmlHandler()
    parser = xml.parsers.expat.ParserCreate()
    parser.StartElementHandler = handler.start
    parser.EndElementHandler = handler.end
    parser.CharacterDataHandler = handler.chars
    try:
        parser.Parse(data, True)
    except xml.parsers.expat.ExpatError as exc:
        raise CorpusParseError(f"malformed XML: {exc}", parser.ErrorByteIndex) from None
    return handler.records


def _parse_jsonl(data: bytes) -> list[RawPatentRecord]:
    records = []
    offset = 0
    for line in data.split(b"\n"):
        stripped = line.strip()
        if stripped:
            try:
                obj = json.loads(stripped.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise CorpusParseError(f"malformed JSONL line: {exc}", offset) from None
            if not isinstance(obj, dict):
                raise CorpusParseError("malformed JSONL line: expected an object", offset)
            label = obj.get("main_label")
            records.append(
                RawPatentRecord(
                    doc_id=str(obj.get("doc_id", "")),
                    title_abstract=str(obj.get("title_abstract", "") or ""),
                    description=str(obj.get("description", "") or ""),
                    claims=str(obj.get("claims", "") or ""),
                    label=None if label is None else str(label),
                )
            )
        offset += len(line) + 1
    return records


def parse_corpus(input_path, format: str) -> list[RawPatentRecord]:
    """Parse a corpus file into raw records, one per document element or line.

    Records missing the main-classification tag are kept but unlabeled;
    admission filtering happens in `filter_admitted`.
    """
    if format not in ("xml", "jsonl"):
        raise ValueError(f"unknown corpus format {format!r}; expected 'xml' or 'jsonl'")
    with open(input_path, "rb") as fh:
        data = fh.read()
    return _parse_xml(data) if format == "xml" else _parse_jsonl(data)


# ---------------------------------------------------------------------------
# admission, pools, split, stats

def filter_admitted(records) -> list[PatentDocument]:
    """Keep records with a parseable sub-class label and all three sections non-empty.

    Input order is preserved. Accepts already-admitted documents unchanged,
    so the filter is idempotent.
    """
    admitted: list[PatentDocument] = []
    for record in records:
        if isinstance(record, PatentDocument):
            label: IpcSubclass | None = record.main_label
        else:
            label = None
            if record.label is not None:
                try:
                    label = IpcSubclass.parse(record.label)
                except ValueError:
                    label = None
        if label is None:
            continue
        if not (record.title_abstract and record.description and record.claims):
            continue
        admitted.append(
            PatentDocument(
                doc_id=record.doc_id,
                title_abstract=record.title_abstract,
                description=record.description,
                claims=record.claims,
                main_label=label,
            )
        )
    return admitted


def build_pools(docs: list[PatentDocument]) -> dict[str, SectionPool]:
    """Derive the five pools; every pool covers exactly the admitted set."""
    pools = {kind: SectionPool(kind, []) for kind in POOL_KINDS}
    for doc in docs:
        pools["all_sections"].documents.append(
            (doc.doc_id, " ".join((doc.title_abstract, doc.description, doc.claims)))
        )
        pools["title_abstract"].documents.append((doc.doc_id, doc.title_abstract))
        pools["description"].documents.append((doc.doc_id, doc.description))
        pools["claims"].documents.append((doc.doc_id, doc.claims))
        pools["per_section_y"].documents.append(
            (doc.doc_id, (doc.title_abstract, doc.description, doc.claims))
        )
    return pools


def split(docs: list[PatentDocument], seed: int) -> SplitManifest:
    """Deterministic 80/10/10 split: Fisher-Yates shuffle under seed, then ratio cut."""
    n = len(docs)
    if n < 10:
        raise ValueError("too few documents to split")
    ids = [doc.doc_id for doc in docs]
    order = list(range(n))
    rng = np.random.Generator(np.random.PCG64(seed))
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        order[i], order[j] = order[j], order[i]
    shuffled = [ids[i] for i in order]
    n_train = int(round_half_up(SPLIT_RATIOS[0] * n))
    n_val = int(round_half_up(SPLIT_RATIOS[1] * n))
    return SplitManifest(
        seed=seed,
        train=shuffled[:n_train],
        validation=shuffled[n_train : n_train + n_val],
        test=shuffled[n_train + n_val :],
    )


def section_stats(docs: list[PatentDocument]) -> SectionStats:
    """Min/max/mean token counts per section over the admitted set."""
    stats = SectionStats()
    for section in SECTIONS:
        counts = [len(tokenize(getattr(doc, section))) for doc in docs]
        if counts:
            stats.per_section[section] = (min(counts), max(counts), Fraction(sum(counts), len(counts)))
        else:
            stats.per_section[section] = (0, 0, Fraction(0))
    return stats


# ---------------------------------------------------------------------------
# JSONL emission

def document_to_json(doc: PatentDocument) -> str:
    return json.dumps(
        {
            "doc_id": doc.doc_id,
            "title_abstract": doc.title_abstract,
            "description": doc.description,
            "claims": doc.claims,
            "main_label": doc.main_label.code,
        },
        ensure_ascii=False,
        sort_keys=True,
    )


def write_corpus_jsonl(docs: list[PatentDocument], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(document_to_json(doc) + "\n")


def write_pool_jsonl(pool: SectionPool, docs: list[PatentDocument], path) -> None:
    """Emit a pool as JSONL; mono pools carry text, the per-section pool the triple."""
    labels = {doc.doc_id: doc.main_label.code for doc in docs}
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, payload in pool.documents:
            if pool.kind == "per_section_y":
                ta, desc, claims = payload
                row = {
                    "doc_id": doc_id,
                    "title_abstract": ta,
                    "description": desc,
                    "claims": claims,
                    "main_label": labels[doc_id],
                }
            else:
                row = {"doc_id": doc_id, "text": payload, "main_label": labels[doc_id]}
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def read_pool_jsonl(path) -> list[dict]:
    """Read an emitted pool file back into row dicts."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows
