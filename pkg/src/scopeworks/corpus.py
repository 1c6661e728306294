"""Corpus ingestion and canonical storage.

Three input layouts are supported and normalized to one in-memory
representation:

* BioScope-style inline XML (``sentence`` elements containing ``cue``
  and ``xcope`` markup, cues pointing at scopes via a ``ref`` attribute),
* SFU-review-style inline XML (``SENTENCE`` elements, scopes pointing
  back at cues via a ``ref``/``SRC`` child element),
* a blank-line separated column layout for negation data (token column
  plus one cue/scope column group per annotation).

The canonical interchange format is JSON Lines: a header line
``{"schema": "scopeworks-corpus", "version": 1, ...}`` followed by one
sentence object per line.  ``read_canonical(write_canonical(c))``
round-trips every valid corpus.
"""

from __future__ import annotations

import json
import logging
import unicodedata
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field

from .errors import (
    ColumnFormatError,
    ConfigError,
    CorpusParseError,
    CorpusStructureError,
    SchemaError,
    SchemaVersionError,
)

log = logging.getLogger(__name__)

CANONICAL_SCHEMA = "scopeworks-corpus"
CANONICAL_VERSION = 1

CUE_KINDS = ("speculation", "negation")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CueAnnotation:
    """One cue: the word(s) expressing speculation or negation.

    ``word_indices`` holds the sentence word positions covered by the
    cue, sorted and duplicate-free; more than one index means a
    multiword cue.  ``note`` carries parser provenance (e.g. an affixal
    cue recorded at full-word granularity) and is not serialized.
    """

    id: str
    kind: str
    word_indices: tuple[int, ...]
    note: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ScopeAnnotation:
    """The word-index set affected by one cue.

    The set may be non-contiguous (column-format negation data) and may
    be empty when the gold annotation itself has an empty scope.
    """

    cue_id: str
    word_indices: frozenset[int]


@dataclass(frozen=True)
class AnnotatedSentence:
    """One sentence with its cue and scope annotations."""

    sentence_id: str
    words: tuple[str, ...]
    cues: tuple[CueAnnotation, ...] = ()
    scopes: tuple[ScopeAnnotation, ...] = ()


@dataclass(frozen=True)
class Corpus:
    """A named collection of annotated sentences for one cue kind."""

    name: str
    cue_kind: str
    sentences: tuple[AnnotatedSentence, ...]


def validate_sentence(sentence: AnnotatedSentence) -> None:
    """Check the structural invariants of one sentence; raise on violation."""
    n = len(sentence.words)
    sid = sentence.sentence_id
    seen_cue_ids = set()
    for cue in sentence.cues:
        if cue.id in seen_cue_ids:
            raise CorpusStructureError(f"duplicate cue id {cue.id!r} in sentence {sid!r}")
        seen_cue_ids.add(cue.id)
        if cue.kind not in CUE_KINDS:
            raise CorpusStructureError(f"cue {cue.id!r} has unknown kind {cue.kind!r}")
        if not cue.word_indices:
            raise CorpusStructureError(f"cue {cue.id!r} in sentence {sid!r} covers no words")
        if list(cue.word_indices) != sorted(set(cue.word_indices)):
            raise CorpusStructureError(
                f"cue {cue.id!r} in sentence {sid!r} has unsorted or duplicate word indices"
            )
        if cue.word_indices[0] < 0 or cue.word_indices[-1] >= n:
            raise CorpusStructureError(
                f"cue {cue.id!r} in sentence {sid!r} has word index out of range [0, {n})"
            )
    scoped = set()
    for scope in sentence.scopes:
        if scope.cue_id not in seen_cue_ids:
            raise CorpusStructureError(
                f"scope in sentence {sid!r} references unknown cue {scope.cue_id!r}"
            )
        if scope.cue_id in scoped:
            raise CorpusStructureError(
                f"cue {scope.cue_id!r} in sentence {sid!r} has more than one scope"
            )
        scoped.add(scope.cue_id)
        if any(i < 0 or i >= n for i in scope.word_indices):
            raise CorpusStructureError(
                f"scope of cue {scope.cue_id!r} in sentence {sid!r} has word index "
                f"out of range [0, {n})"
            )


def validate_corpus(corpus: Corpus) -> None:
    """Check corpus-level invariants (unique ids, consistent cue kind)."""
    if corpus.cue_kind not in CUE_KINDS:
        raise CorpusStructureError(f"unknown cue kind {corpus.cue_kind!r}")
    seen = set()
    for sentence in corpus.sentences:
        if sentence.sentence_id in seen:
            raise CorpusStructureError(f"duplicate sentence id {sentence.sentence_id!r}")
        seen.add(sentence.sentence_id)
        validate_sentence(sentence)
        for cue in sentence.cues:
            if cue.kind != corpus.cue_kind:
                raise CorpusStructureError(
                    f"cue {cue.id!r} in sentence {sentence.sentence_id!r} has kind "
                    f"{cue.kind!r} in a {corpus.cue_kind} corpus"
                )


# ---------------------------------------------------------------------------
# Word segmentation
# ---------------------------------------------------------------------------

def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def segment_text(text: str) -> list[tuple[str, int, int]]:
    """Split running text into word units with [start, end) char offsets.

    Whitespace separates chunks; leading and trailing punctuation of a
    chunk is peeled off as single-character words, interior punctuation
    (hyphens, apostrophes) stays attached.  Annotation element
    boundaries are later mapped onto these character spans.
    """
    out: list[tuple[str, int, int]] = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        out.extend(_split_chunk(text, i, j))
        i = j
    return out


def _split_chunk(text: str, i: int, j: int) -> list[tuple[str, int, int]]:
    a, b = i, j
    lead = []
    while a < b and _is_punct(text[a]):
        lead.append((text[a], a, a + 1))
        a += 1
    trail = []
    while b > a and _is_punct(text[b - 1]):
        trail.append((text[b - 1], b - 1, b))
        b -= 1
    parts = lead
    if a < b:
        parts.append((text[a:b], a, b))
    parts.extend(reversed(trail))
    return parts


def segment_words(text: str) -> list[str]:
    """The word strings of :func:`segment_text`, without offsets."""
    return [w for w, _, _ in segment_text(text)]


# ---------------------------------------------------------------------------
# Inline XML parsing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class XmlDialect:
    """Tag and attribute names of one inline-XML annotation style.

    Two linking conventions exist in the wild and both are supported:
    ``cue_to_scope`` (each cue element carries a reference to its scope
    element's id) and ``scope_to_cue`` (each scope element contains a
    reference child pointing back at a cue id).  Corpus releases vary
    in their exact names, so all of them are configurable; the shipped
    defaults below match the releases these parsers were written
    against.
    """

    name: str
    sentence_tag: str = "sentence"
    cue_tag: str = "cue"
    scope_tag: str = "xcope"
    kind_attr: str = "type"
    link: str = "cue_to_scope"
    # cue_to_scope linking
    cue_ref_attr: str = "ref"
    scope_id_attr: str = "id"
    # scope_to_cue linking
    cue_id_attr: str = "ID"
    scope_ref_tag: str = "ref"
    scope_ref_attr: str = "SRC"


BIOSCOPE_DIALECT = XmlDialect(name="bioscope")
SFU_DIALECT = XmlDialect(name="sfu", sentence_tag="SENTENCE", link="scope_to_cue")

XML_DIALECTS = {"bioscope": BIOSCOPE_DIALECT, "sfu": SFU_DIALECT}


def _byte_offset(data: bytes, line: int, column: int) -> int:
    lines = data.split(b"\n")
    return sum(len(raw) + 1 for raw in lines[: line - 1]) + column


def parse_inline_xml(data: bytes, dialect, cue_kind: str, name: str | None = None) -> Corpus:
    """Parse inline-XML annotation into a :class:`Corpus`.

    ``dialect`` is a dialect name (``"bioscope"`` or ``"sfu"``) or an
    :class:`XmlDialect`.  Cues of the kind other than ``cue_kind`` are
    dropped together with their scopes.  Nested scopes become
    independent annotations.  Document-level structure is traversed but
    only sentences are kept.
    """
    if isinstance(dialect, str):
        try:
            dialect = XML_DIALECTS[dialect]
        except KeyError:
            raise ConfigError(
                f"unknown XML dialect {dialect!r}; known: {sorted(XML_DIALECTS)}"
            ) from None
    if cue_kind not in CUE_KINDS:
        raise ConfigError(f"unknown cue kind {cue_kind!r}; known: {list(CUE_KINDS)}")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, column = exc.position
        raise CorpusParseError(
            f"malformed XML: {exc.msg if hasattr(exc, 'msg') else exc}",
            byte_offset=_byte_offset(data, line, column),
            line=line,
        ) from exc

    sentences = []
    generated = 0
    elements = [root] if root.tag == dialect.sentence_tag else []
    elements += [e for e in root.iter(dialect.sentence_tag) if e is not root]
    for elem in elements:
        sid = elem.get("id") or f"s{generated}"
        generated += 1
        sentence = _sentence_from_xml(elem, sid, dialect, cue_kind)
        if sentence is not None:
            sentences.append(sentence)
    corpus = Corpus(
        name=name or f"custom:{dialect.name}", cue_kind=cue_kind, sentences=tuple(sentences)
    )
    validate_corpus(corpus)
    return corpus


def _sentence_from_xml(elem, sid, dialect: XmlDialect, cue_kind: str):
    chunks: list[str] = []
    spans: list[tuple[object, int, int]] = []
    pos = 0

    def emit(text):
        nonlocal pos
        chunks.append(text)
        pos += len(text)

    def walk(e, record):
        start = pos
        if e.text:
            emit(e.text)
        for child in e:
            walk(child, True)
            if child.tail:
                emit(child.tail)
        if record:
            spans.append((e, start, pos))

    walk(elem, False)
    text = "".join(chunks)
    words = segment_text(text)
    if not words:
        return None

    def covered(a, b):
        return tuple(i for i, (_, s, e) in enumerate(words) if max(a, s) < min(b, e))

    cue_elems = [(e, a, b) for e, a, b in spans if e.tag == dialect.cue_tag]
    scope_elems = [(e, a, b) for e, a, b in spans if e.tag == dialect.scope_tag]

    if dialect.link == "cue_to_scope":
        cues, scopes = _link_cue_to_scope(cue_elems, scope_elems, covered, sid, dialect, cue_kind)
    else:
        cues, scopes = _link_scope_to_cue(cue_elems, scope_elems, covered, sid, dialect, cue_kind)

    cues.sort(key=lambda c: c.word_indices)
    order = {c.id: i for i, c in enumerate(cues)}
    scopes.sort(key=lambda s: order[s.cue_id])
    return AnnotatedSentence(
        sentence_id=sid,
        words=tuple(w for w, _, _ in words),
        cues=tuple(cues),
        scopes=tuple(scopes),
    )


def _link_cue_to_scope(cue_elems, scope_elems, covered, sid, dialect, cue_kind):
    # BioScope style: <cue type="..." ref="X1">..</cue> ... <xcope id="X1">..</xcope>.
    # Several cue elements sharing one ref form a single (discontinuous) cue.
    scope_words: dict[str, set] = {}
    for e, a, b in scope_elems:
        xid = e.get(dialect.scope_id_attr)
        if xid is None:
            continue
        scope_words.setdefault(xid, set()).update(covered(a, b))
    groups: dict[str, set] = {}
    for e, a, b in cue_elems:
        if (e.get(dialect.kind_attr) or "").lower() != cue_kind:
            continue
        ref = e.get(dialect.cue_ref_attr)
        if ref is None:
            raise CorpusStructureError(
                f"cue element in sentence {sid!r} lacks the {dialect.cue_ref_attr!r} attribute"
            )
        groups.setdefault(ref, set()).update(covered(a, b))
    cues, scopes = [], []
    for ref, idxs in groups.items():
        if ref not in scope_words:
            raise CorpusStructureError(
                f"cue {ref!r} in sentence {sid!r} references a scope that does not exist"
            )
        if not idxs:
            raise CorpusStructureError(f"cue {ref!r} in sentence {sid!r} covers no words")
        cues.append(CueAnnotation(id=ref, kind=cue_kind, word_indices=tuple(sorted(idxs))))
        scopes.append(ScopeAnnotation(cue_id=ref, word_indices=frozenset(scope_words[ref])))
    return cues, scopes


def _link_scope_to_cue(cue_elems, scope_elems, covered, sid, dialect, cue_kind):
    # SFU style: <cue type="..." ID="c1">..</cue> ... <xcope><ref SRC="c1"/>..</xcope>.
    # A cue may legitimately have no scope (kept with an empty scope set);
    # a reference to a cue id that does not exist is a structural error.
    all_cue_ids = set()
    kept: dict[str, set] = {}
    generated = 0
    for e, a, b in cue_elems:
        cid = e.get(dialect.cue_id_attr)
        if cid is None:
            cid = f"{sid}-cue{generated}"
            generated += 1
        all_cue_ids.add(cid)
        if (e.get(dialect.kind_attr) or "").lower() != cue_kind:
            continue
        idxs = covered(a, b)
        if not idxs:
            raise CorpusStructureError(f"cue {cid!r} in sentence {sid!r} covers no words")
        kept.setdefault(cid, set()).update(idxs)
    scope_words: dict[str, set] = {}
    for e, a, b in scope_elems:
        for ref in e.findall(dialect.scope_ref_tag):
            src = ref.get(dialect.scope_ref_attr)
            if src is None:
                continue
            if src not in all_cue_ids:
                raise CorpusStructureError(
                    f"scope in sentence {sid!r} references missing cue {src!r}"
                )
            if src in kept:
                scope_words.setdefault(src, set()).update(covered(a, b))
    cues, scopes = [], []
    for cid, idxs in kept.items():
        cues.append(CueAnnotation(id=cid, kind=cue_kind, word_indices=tuple(sorted(idxs))))
        scopes.append(
            ScopeAnnotation(cue_id=cid, word_indices=frozenset(scope_words.get(cid, ())))
        )
    return cues, scopes


# ---------------------------------------------------------------------------
# Column-format parsing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ColumnDialect:
    """Column positions of one blank-line-separated token layout.

    The default layout is minimal: the token in column 0 followed by
    one (cue, scope) column pair per annotation, ``_`` marking empty
    cells.  ``sem2012`` matches the *SEM-2012 negation release
    (Sherlock): token in column 3, annotation groups of three columns
    (cue, scope, event) starting at column 7, and a single ``***``
    column on sentences without any annotation.
    """

    name: str
    token_col: int = 0
    group_start: int = 1
    group_size: int = 2
    cue_offset: int = 0
    scope_offset: int = 1
    empty_cell: str = "_"
    no_annotation: str = "***"
    sentence_id_cols: tuple[int, ...] | None = None


DEFAULT_COLUMNS = ColumnDialect(name="default")
SEM2012_COLUMNS = ColumnDialect(
    name="sem2012", token_col=3, group_start=7, group_size=3, sentence_id_cols=(0, 1)
)

COLUMN_DIALECTS = {"default": DEFAULT_COLUMNS, "sem2012": SEM2012_COLUMNS}


def parse_column_format(
    data: bytes, cue_kind: str, dialect: ColumnDialect | str = DEFAULT_COLUMNS,
    name: str | None = None,
) -> Corpus:
    """Parse a blank-line-separated column file into a :class:`Corpus`.

    Scope sets may be discontinuous.  A cue cell holding a proper
    substring of its token (affixal negation such as ``im`` within
    ``impossible``) is recorded as a full-word cue, with the original
    cell kept as a provenance note on the annotation.
    """
    if isinstance(dialect, str):
        try:
            dialect = COLUMN_DIALECTS[dialect]
        except KeyError:
            raise ConfigError(
                f"unknown column dialect {dialect!r}; known: {sorted(COLUMN_DIALECTS)}"
            ) from None
    if cue_kind not in CUE_KINDS:
        raise ConfigError(f"unknown cue kind {cue_kind!r}; known: {list(CUE_KINDS)}")

    sentences = []
    block: list[tuple[int, str]] = []
    for lineno, raw in enumerate(data.decode("utf-8").splitlines(), start=1):
        if raw.strip():
            block.append((lineno, raw))
        elif block:
            sentences.append(_sentence_from_block(block, dialect, cue_kind, len(sentences)))
            block = []
    if block:
        sentences.append(_sentence_from_block(block, dialect, cue_kind, len(sentences)))

    corpus = Corpus(
        name=name or "custom:columns", cue_kind=cue_kind, sentences=tuple(sentences)
    )
    validate_corpus(corpus)
    return corpus


def _sentence_from_block(block, dialect: ColumnDialect, cue_kind, index):
    rows = []
    ncols = None
    for lineno, raw in block:
        cells = raw.split("\t") if "\t" in raw else raw.split()
        if ncols is None:
            ncols = len(cells)
        elif len(cells) != ncols:
            raise ColumnFormatError(
                f"ragged row: expected {ncols} columns, found {len(cells)}", line=lineno
            )
        if len(cells) <= dialect.token_col:
            raise ColumnFormatError(
                f"row has no token column (index {dialect.token_col})", line=lineno
            )
        rows.append(cells)

    first_line = block[0][0]
    if dialect.sentence_id_cols:
        try:
            sid = "-".join(rows[0][c] for c in dialect.sentence_id_cols)
        except IndexError:
            raise ColumnFormatError("missing sentence-id column", line=first_line) from None
    else:
        sid = f"s{index}"
    words = tuple(r[dialect.token_col] for r in rows)

    tail = ncols - dialect.group_start
    if tail <= 0:
        return AnnotatedSentence(sentence_id=sid, words=words)
    if tail == 1 and all(r[dialect.group_start] == dialect.no_annotation for r in rows):
        return AnnotatedSentence(sentence_id=sid, words=words)
    if tail % dialect.group_size != 0:
        raise ColumnFormatError(
            f"{tail} annotation columns do not divide into groups of {dialect.group_size}",
            line=first_line,
        )

    cues, scopes = [], []
    for g in range(tail // dialect.group_size):
        base = dialect.group_start + g * dialect.group_size
        cue_idxs, notes = [], []
        scope_idxs = set()
        for i, row in enumerate(rows):
            cue_cell = row[base + dialect.cue_offset]
            scope_cell = row[base + dialect.scope_offset]
            if cue_cell not in (dialect.empty_cell, dialect.no_annotation):
                cue_idxs.append(i)
                token = row[dialect.token_col]
                if cue_cell != token and cue_cell in token:
                    notes.append(f"affixal cue {cue_cell!r} in token {token!r}")
            if scope_cell not in (dialect.empty_cell, dialect.no_annotation):
                scope_idxs.add(i)
        if not cue_idxs:
            if scope_idxs:
                log.warning("sentence %s: scope column group %d has no cue; dropped", sid, g)
            continue
        cue_id = f"{sid}-c{g}"
        note = "; ".join(notes) if notes else None
        if note:
            log.info("sentence %s: %s recorded at full-word granularity", sid, note)
        cues.append(
            CueAnnotation(id=cue_id, kind=cue_kind, word_indices=tuple(cue_idxs), note=note)
        )
        scopes.append(ScopeAnnotation(cue_id=cue_id, word_indices=frozenset(scope_idxs)))
    return AnnotatedSentence(sentence_id=sid, words=words, cues=tuple(cues), scopes=tuple(scopes))


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def corpus_stats(corpus: Corpus) -> dict:
    """Sentence/cue/scope counts and a cues-per-sentence histogram."""
    hist = Counter(len(s.cues) for s in corpus.sentences)
    return {
        "sentence_count": len(corpus.sentences),
        "cue_count": sum(len(s.cues) for s in corpus.sentences),
        "multiword_cue_count": sum(
            1 for s in corpus.sentences for c in s.cues if len(c.word_indices) > 1
        ),
        "scope_count": sum(len(s.scopes) for s in corpus.sentences),
        "cues_per_sentence": dict(sorted(hist.items())),
    }


# ---------------------------------------------------------------------------
# Canonical JSON Lines interchange
# ---------------------------------------------------------------------------

def write_canonical(corpus: Corpus, sink=None) -> bytes:
    """Serialize a corpus to the canonical JSON Lines format.

    Returns the encoded bytes; when ``sink`` (a binary file-like) is
    given, the bytes are also written to it.
    """
    validate_corpus(corpus)
    header = {
        "schema": CANONICAL_SCHEMA,
        "version": CANONICAL_VERSION,
        "name": corpus.name,
        "cue_kind": corpus.cue_kind,
    }
    lines = [json.dumps(header, ensure_ascii=False)]
    for s in corpus.sentences:
        obj = {
            "sentence_id": s.sentence_id,
            "words": list(s.words),
            "cues": [
                {"id": c.id, "kind": c.kind, "word_indices": list(c.word_indices)}
                for c in s.cues
            ],
            "scopes": [
                {"cue_id": sc.cue_id, "word_indices": sorted(sc.word_indices)}
                for sc in s.scopes
            ],
        }
        lines.append(json.dumps(obj, ensure_ascii=False))
    data = ("\n".join(lines) + "\n").encode("utf-8")
    if sink is not None:
        sink.write(data)
    return data


def read_canonical(data: bytes) -> Corpus:
    """Parse canonical JSON Lines back into a validated :class:`Corpus`."""
    lines = [ln for ln in data.decode("utf-8").splitlines() if ln.strip()]
    if not lines:
        raise SchemaError("empty canonical file: missing header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CorpusParseError(f"bad header line: {exc}", line=1) from exc
    if not isinstance(header, dict) or header.get("schema") != CANONICAL_SCHEMA:
        raise SchemaError(
            f"not a {CANONICAL_SCHEMA} file (header schema: {header.get('schema')!r})"
            if isinstance(header, dict) else "header line is not an object"
        )
    if header.get("version") != CANONICAL_VERSION:
        raise SchemaVersionError(
            f"unsupported corpus schema version {header.get('version')!r}; "
            f"this build reads version {CANONICAL_VERSION}"
        )

    sentences = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusParseError(f"bad sentence line: {exc}", line=lineno) from exc
        try:
            sentences.append(_sentence_from_json(obj))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"line {lineno}: malformed sentence object ({exc})") from exc

    cue_kind = header.get("cue_kind")
    if cue_kind is None:
        kinds = {c.kind for s in sentences for c in s.cues}
        cue_kind = kinds.pop() if len(kinds) == 1 else "speculation"
    corpus = Corpus(
        name=header.get("name", "custom:canonical"),
        cue_kind=cue_kind,
        sentences=tuple(sentences),
    )
    validate_corpus(corpus)
    return corpus


def _sentence_from_json(obj: dict) -> AnnotatedSentence:
    return AnnotatedSentence(
        sentence_id=obj["sentence_id"],
        words=tuple(obj["words"]),
        cues=tuple(
            CueAnnotation(
                id=c["id"], kind=c["kind"], word_indices=tuple(int(i) for i in c["word_indices"])
            )
            for c in obj["cues"]
        ),
        scopes=tuple(
            ScopeAnnotation(
                cue_id=sc["cue_id"], word_indices=frozenset(int(i) for i in sc["word_indices"])
            )
            for sc in obj["scopes"]
        ),
    )


def load_corpus(path) -> Corpus:
    with open(path, "rb") as fh:
        return read_canonical(fh.read())


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "wb") as fh:
        write_canonical(corpus, fh)
