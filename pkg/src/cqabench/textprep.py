"""Post-text preprocessing: markup decomposition, Unicode normalisation,
link-preserving cleaning, per-language comment stripping, language
identification, bimodal token packing, and sample-size arithmetic.

Posts are split into paragraph text and preformatted code blocks. Text is
NFC-normalised, then stripped of punctuation except inside scheme-prefixed
links, lowercased, stop-word filtered, and whitespace-collapsed (the link
spans survive byte-for-byte throughout). Code keeps its structure except
for comments and docstrings, which are removed by per-language rules.
The two token streams are packed as

    [CLS] w1 ... wn [SEP] c1 ... cm [EOS]

with at most 512 tokens in total: exactly 3 specials, so 509 content
tokens, split proportionally between the segments when truncation is
needed.
"""

from __future__ import annotations

import json
import math
import re
import unicodedata
import warnings
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path

from .errors import ConfigError, ParseError

STUDY_LANGUAGES = ("SQL", "JavaScript", "Python", "Ruby", "Java")

START_TOKEN = "[CLS]"
SEPARATOR_TOKEN = "[SEP]"
END_TOKEN = "[EOS]"
UNKNOWN_TOKEN = "[UNK]"
MAX_SEQUENCE_TOKENS = 512
MAX_CONTENT_TOKENS = MAX_SEQUENCE_TOKENS - 3

LINK_SCHEMES = ("http://", "https://", "ftp://")

#: Characters treated as punctuation outside link spans.
PUNCTUATION_CHARS = (
    "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~"
    "‘’“”–—…"
)
_PUNCT_TABLE = str.maketrans("", "", PUNCTUATION_CHARS)

DEFAULT_STOPWORDS = frozenset("""
a about above after again all am an and any are as at be because been
before being below between both but by did do does doing down during each
few for from further had has have having he her here hers him his how i if
in into is it its itself just me more most my no nor not of off on once
only or other our ours out over own same she so some such than that the
their theirs them then there these they this those through to too under
until up very was we were what when where which while who whom why will
with you your yours
""".split())


# ---------------------------------------------------------------------------
# Post decomposition


@dataclass(frozen=True)
class PostDocument:
    post_id: str | None
    paragraphs: tuple[str, ...]
    code_blocks: tuple[str, ...]


class _PostParser(HTMLParser):
    """Lenient extractor: paragraph-tag text and preformatted-code text."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.paragraphs: list[str] = []
        self.code_blocks: list[str] = []
        self._p_depth = 0
        self._pre_depth = 0
        self._in_pre_code = False
        self._p_chunks: list[str] = []
        self._code_chunks: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag == "p":
            if self._p_depth == 0:
                self._p_chunks = []
            self._p_depth += 1
        elif tag == "pre":
            self._close_paragraph()  # block elements end an open paragraph
            self._pre_depth += 1
        elif tag == "code" and self._pre_depth > 0 and not self._in_pre_code:
            self._in_pre_code = True
            self._code_chunks = []

    def handle_endtag(self, tag):
        if tag == "p" and self._p_depth > 0:
            self._p_depth -= 1
            if self._p_depth == 0:
                self._close_paragraph(force=True)
        elif tag == "pre" and self._pre_depth > 0:
            self._pre_depth -= 1
            if self._in_pre_code and self._pre_depth == 0:
                self._close_code()
        elif tag == "code" and self._in_pre_code:
            self._close_code()

    def _close_paragraph(self, force: bool = False):
        if self._p_depth == 0 and not force and not self._p_chunks:
            return
        text = "".join(self._p_chunks).strip()
        if text:
            self.paragraphs.append(text)
        self._p_chunks = []
        self._p_depth = 0

    def _close_code(self):
        self._in_pre_code = False
        code = "".join(self._code_chunks).strip("\n")
        if code.strip():
            self.code_blocks.append(code)

    def close(self):
        # Flush unterminated containers so malformed posts keep their text.
        super().close()
        if self._in_pre_code:
            self._close_code()
        self._close_paragraph()

    def handle_data(self, data):
        if self._in_pre_code:
            self._code_chunks.append(data)
        elif self._p_depth > 0:
            self._p_chunks.append(data)


def extract_parts(html: str, post_id: str | None = None) -> PostDocument:
    """Pull paragraph text and preformatted code out of post markup.

    Parsing is lenient; fragments the parser cannot digest are skipped with
    a diagnostic instead of failing the post.
    """
    parser = _PostParser()
    try:
        parser.feed(html)
        parser.close()
    except Exception as exc:  # malformed fragment: keep what was parsed
        warnings.warn(f"post {post_id or '<anonymous>'}: "
                      f"unparseable fragment skipped ({exc})")
    return PostDocument(post_id, tuple(parser.paragraphs),
                        tuple(parser.code_blocks))


# ---------------------------------------------------------------------------
# Text cleaning


def nfc_normalize(text: str) -> str:
    """Canonical-composition normalisation (information-preserving)."""
    if not isinstance(text, str):
        raise ParseError("expected a Unicode string")
    return unicodedata.normalize("NFC", text)


def is_link_token(token: str) -> bool:
    lowered = token.lower()
    return any(lowered.startswith(scheme) for scheme in LINK_SCHEMES)


def remove_punctuation_keep_links(text: str) -> str:
    """Strip punctuation outside links; scheme-prefixed tokens stay
    byte-intact. Case is preserved at this stage."""
    out = []
    for token in text.split():
        if is_link_token(token):
            out.append(token)
            continue
        cleaned = token.translate(_PUNCT_TABLE)
        if cleaned:
            out.append(cleaned)
    return " ".join(out)


def clean_text(text: str, stopwords: frozenset[str] | None = None) -> str:
    """Punctuation/link pass, then lowercasing, stop-word removal, and
    whitespace collapsing. Input is expected to be NFC-normalised."""
    stopwords = DEFAULT_STOPWORDS if stopwords is None else stopwords
    out = []
    for token in remove_punctuation_keep_links(text).split():
        if is_link_token(token):
            out.append(token)
            continue
        lowered = token.lower()
        if lowered in stopwords:
            continue
        out.append(lowered)
    return " ".join(out)


# ---------------------------------------------------------------------------
# Comment stripping


@dataclass(frozen=True)
class LanguageCommentRules:
    """Comment syntax of one language, compiled into removal regexes."""

    line_markers: tuple[str, ...] = ()
    block_delimiters: tuple[tuple[str, str], ...] = ()
    interpolation_guards: tuple[str, ...] = ()
    consume_leading_whitespace: bool = False
    preserve_shebang: bool = False
    line_anchored_blocks: bool = False

    def line_patterns(self) -> list[re.Pattern]:
        patterns = []
        for marker in self.line_markers:
            guards = "".join(
                f"(?!{re.escape(g[len(marker):])})"
                for g in self.interpolation_guards
                if g.startswith(marker) and len(g) > len(marker)
            )
            prefix = r"[ \t]*" if self.consume_leading_whitespace else ""
            patterns.append(
                re.compile(prefix + re.escape(marker) + guards + r"[^\n]*")
            )
        return patterns

    def block_patterns(self) -> list[re.Pattern]:
        patterns = []
        for opener, closer in self.block_delimiters:
            if self.line_anchored_blocks:
                patterns.append(re.compile(
                    r"^[ \t]*" + re.escape(opener) + r"\b.*?^[ \t]*"
                    + re.escape(closer) + r"[^\n]*\n?",
                    re.DOTALL | re.MULTILINE,
                ))
            else:
                patterns.append(re.compile(
                    re.escape(opener) + r".*?" + re.escape(closer),
                    re.DOTALL,
                ))
        return patterns


@dataclass(frozen=True)
class CommentRuleSet:
    rules: dict[str, LanguageCommentRules]

    def for_language(self, language: str) -> LanguageCommentRules:
        try:
            return self.rules[language]
        except KeyError:
            raise ConfigError(f"no comment rules for language {language!r}") \
                from None

    def covers_studied_languages(self) -> bool:
        return all(lang in self.rules for lang in STUDY_LANGUAGES)


def default_comment_rules() -> CommentRuleSet:
    return CommentRuleSet({
        "SQL": LanguageCommentRules(
            line_markers=("--",),
            block_delimiters=(("/*", "*/"),),
        ),
        "JavaScript": LanguageCommentRules(
            line_markers=("//",),
            block_delimiters=(("/*", "*/"),),
        ),
        "Java": LanguageCommentRules(
            line_markers=("//",),
            block_delimiters=(("/*", "*/"),),
        ),
        "Python": LanguageCommentRules(
            line_markers=("#",),
            block_delimiters=(('"""', '"""'), ("'''", "'''")),
            consume_leading_whitespace=True,
            preserve_shebang=True,
        ),
        "Ruby": LanguageCommentRules(
            line_markers=("#",),
            block_delimiters=(("=begin", "=end"),),
            interpolation_guards=("#{",),
            consume_leading_whitespace=True,
            preserve_shebang=True,
            line_anchored_blocks=True,
        ),
    })


def load_comment_rules(path: str | Path) -> CommentRuleSet:
    """Read a declarative rules file (YAML or JSON mapping)."""
    import yaml

    with Path(path).open("r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a language -> rules mapping")
    rules = {}
    for language, entry in raw.items():
        rules[language] = LanguageCommentRules(
            line_markers=tuple(entry.get("line_markers", ())),
            block_delimiters=tuple(
                (a, b) for a, b in entry.get("block_delimiters", ())
            ),
            interpolation_guards=tuple(entry.get("interpolation_guards", ())),
            consume_leading_whitespace=bool(
                entry.get("consume_leading_whitespace", False)),
            preserve_shebang=bool(entry.get("preserve_shebang", False)),
            line_anchored_blocks=bool(
                entry.get("line_anchored_blocks", False)),
        )
    return CommentRuleSet(rules)


def strip_comments(code: str, language: str,
                   rules: CommentRuleSet | None = None) -> str:
    """Remove line and block comments (docstrings included) for one
    language; all other bytes pass through untouched.

    Known limitation of the regex approach: comment markers inside string
    literals are not recognised as literals, except for the guarded
    interpolation sequences (e.g. Ruby's "#{").
    """
    rules = rules or default_comment_rules()
    lang_rules = rules.for_language(language)

    shebang = ""
    body = code
    if lang_rules.preserve_shebang and body.startswith("#!"):
        newline = body.find("\n")
        if newline < 0:
            return body
        shebang, body = body[:newline + 1], body[newline + 1:]

    for pattern in lang_rules.block_patterns():
        body = pattern.sub("", body)
    for pattern in lang_rules.line_patterns():
        body = pattern.sub("", body)
    return shebang + body


# ---------------------------------------------------------------------------
# Language identification


@dataclass(frozen=True)
class CodeSnippet:
    text: str
    language: str | None = None


@dataclass(frozen=True)
class LanguageGuess:
    language: str  # one of the studied languages, or "other"
    source: str  # "external" | "fallback"


_HEURISTIC_PATTERNS: dict[str, tuple[tuple[re.Pattern, float], ...]] = {
    "SQL": (
        (re.compile(r"\bselect\b.*\bfrom\b", re.I | re.S), 3.0),
        (re.compile(r"\binsert\s+into\b", re.I), 3.0),
        (re.compile(r"\bcreate\s+table\b", re.I), 3.0),
        (re.compile(r"\bupdate\b.*\bset\b", re.I | re.S), 2.0),
        (re.compile(r"\bdelete\s+from\b", re.I), 3.0),
        (re.compile(r"\bwhere\b", re.I), 1.0),
        (re.compile(r"\b(inner|left|right|outer)\s+join\b", re.I), 2.0),
        (re.compile(r"\b(group|order)\s+by\b", re.I), 2.0),
        (re.compile(r"\bvarchar\b|\bprimary\s+key\b", re.I), 2.0),
    ),
    "JavaScript": (
        (re.compile(r"\b(var|let|const)\s+\w+\s*="), 2.5),
        (re.compile(r"\bfunction\s*\w*\s*\("), 2.0),
        (re.compile(r"=>"), 2.0),
        (re.compile(r"console\.log"), 3.0),
        (re.compile(r"\bdocument\.|\bwindow\."), 2.5),
        (re.compile(r"===|!=="), 2.0),
        (re.compile(r"\brequire\(['\"]"), 1.5),
        (re.compile(r"\bnull\b"), 0.5),
    ),
    "Python": (
        (re.compile(r"\bdef\s+\w+\s*\(.*\)\s*:"), 3.0),
        (re.compile(r"\bimport\s+\w+"), 1.5),
        (re.compile(r"\bfrom\s+\w+\s+import\b"), 2.5),
        (re.compile(r"\bself\b"), 2.0),
        (re.compile(r"\belif\b"), 2.5),
        (re.compile(r"\bNone\b|\bTrue\b|\bFalse\b"), 1.0),
        (re.compile(r"\bprint\s*\("), 1.5),
        (re.compile(r"\blambda\b"), 1.5),
        (re.compile(r"^\s*@\w+\s*$", re.M), 1.5),
    ),
    "Ruby": (
        (re.compile(r"\bdef\s+\w+.*?\bend\b", re.S), 2.5),
        (re.compile(r"\bputs\b"), 2.5),
        (re.compile(r"#\{"), 3.0),
        (re.compile(r"\brequire\s+['\"]"), 1.5),
        (re.compile(r"\battr_(accessor|reader|writer)\b"), 3.0),
        (re.compile(r"\bdo\s*\|\w+\|"), 3.0),
        (re.compile(r"^\s*end\s*$", re.M), 1.5),
        (re.compile(r"\bnil\b"), 1.5),
        (re.compile(r"\.each\b"), 1.5),
    ),
    "Java": (
        (re.compile(r"\bpublic\s+(static\s+)?(class|void|int|String)\b"), 3.0),
        (re.compile(r"\bSystem\.out\.print"), 3.0),
        (re.compile(r"\bprivate\s+\w+"), 2.0),
        (re.compile(r"\bimport\s+java[x]?\."), 3.0),
        (re.compile(r"\bnew\s+[A-Z]\w*\s*\("), 1.5),
        (re.compile(r"\bString\b"), 1.0),
        (re.compile(r"\bextends\b|\bimplements\b"), 2.0),
        (re.compile(r"@Override"), 3.0),
    ),
}


def heuristic_language(text: str) -> str:
    """Keyword-pattern vote over the five studied languages."""
    scores = {
        lang: sum(w for pattern, w in patterns if pattern.search(text))
        for lang, patterns in _HEURISTIC_PATTERNS.items()
    }
    best = max(scores, key=lambda lang: (scores[lang], -STUDY_LANGUAGES.index(lang)))
    return best if scores[best] > 0 else "other"


def identify_language(snippet: str, identifier=None) -> LanguageGuess:
    """Delegate to a pluggable identifier; fall back to the built-in
    keyword heuristic (flagged as such) when it is absent or fails."""
    if not snippet or not snippet.strip():
        raise ParseError("cannot identify the language of an empty snippet")
    if identifier is not None:
        try:
            language = identifier(snippet)
        except Exception:
            language = None
        if language:
            return LanguageGuess(str(language), "external")
    return LanguageGuess(heuristic_language(snippet), "fallback")


def filter_studied(snippets: list[CodeSnippet]) -> list[CodeSnippet]:
    return [s for s in snippets if s.language in STUDY_LANGUAGES]


# ---------------------------------------------------------------------------
# Tokenisation and packing


_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Whitespace/punctuation-boundary splitting (subword tokenizers can be
    slotted in wherever a token list is accepted)."""
    return _TOKEN_RE.findall(text)


@dataclass(frozen=True)
class BimodalSequence:
    """[CLS] word-tokens [SEP] code-tokens [EOS], capped at 512 tokens."""

    tokens: tuple[str, ...]
    word_span: tuple[int, int]  # half-open [start, end)
    code_span: tuple[int, int]
    specials: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.tokens)

    def word_tokens(self) -> tuple[str, ...]:
        return self.tokens[self.word_span[0]:self.word_span[1]]

    def code_tokens(self) -> tuple[str, ...]:
        return self.tokens[self.code_span[0]:self.code_span[1]]


def _proportional_budgets(n_words: int, n_code: int,
                          budget: int) -> tuple[int, int]:
    if n_words == 0:
        return 0, min(n_code, budget)
    if n_code == 0:
        return min(n_words, budget), 0
    word_budget = math.floor(budget * n_words / (n_words + n_code))
    word_budget = min(max(word_budget, 1), budget - 1)
    return word_budget, budget - word_budget


def pack_sequence(word_tokens: list[str], code_tokens: list[str],
                  limit: int = MAX_SEQUENCE_TOKENS) -> BimodalSequence:
    """Frame the two token streams with the three special markers.

    When the combined content exceeds the 509-token budget, each segment is
    tail-truncated to a proportional share (at least one token per
    non-empty segment). The separator is always emitted, even for an empty
    segment, so every sequence carries exactly 3 specials.
    """
    if limit < 4:
        raise ConfigError("limit leaves no room for content")
    if not word_tokens and not code_tokens:
        raise ParseError("both segments are empty; nothing to pack")
    reserved = {START_TOKEN, SEPARATOR_TOKEN, END_TOKEN}
    if reserved & set(word_tokens) or reserved & set(code_tokens):
        raise ParseError("content tokens may not equal the special markers")

    budget = limit - 3
    if len(word_tokens) + len(code_tokens) > budget:
        n_words, n_code = _proportional_budgets(
            len(word_tokens), len(code_tokens), budget)
    else:
        n_words, n_code = len(word_tokens), len(code_tokens)
    words = list(word_tokens[:n_words])
    code = list(code_tokens[:n_code])

    tokens = [START_TOKEN, *words, SEPARATOR_TOKEN, *code, END_TOKEN]
    sep_pos = 1 + len(words)
    return BimodalSequence(
        tokens=tuple(tokens),
        word_span=(1, sep_pos),
        code_span=(sep_pos + 1, sep_pos + 1 + len(code)),
        specials={START_TOKEN: 0, SEPARATOR_TOKEN: sep_pos,
                  END_TOKEN: len(tokens) - 1},
    )


class Vocabulary:
    """Token-to-id table with reserved special ids, built in first-seen order."""

    SPECIALS = (START_TOKEN, SEPARATOR_TOKEN, END_TOKEN, UNKNOWN_TOKEN)

    def __init__(self) -> None:
        self._ids: dict[str, int] = {
            tok: i for i, tok in enumerate(self.SPECIALS)
        }

    def __len__(self) -> int:
        return len(self._ids)

    def add_sequence(self, sequence: BimodalSequence) -> None:
        for token in sequence.tokens:
            if token not in self._ids:
                self._ids[token] = len(self._ids)

    def encode(self, sequence: BimodalSequence) -> list[int]:
        unk = self._ids[UNKNOWN_TOKEN]
        return [self._ids.get(tok, unk) for tok in sequence.tokens]

    def save(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            json.dump(self._ids, fh, ensure_ascii=False, indent=0,
                      sort_keys=False)

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        vocab = cls()
        with Path(path).open("r", encoding="utf-8") as fh:
            vocab._ids = {str(k): int(v) for k, v in json.load(fh).items()}
        return vocab


# ---------------------------------------------------------------------------
# Whole-post pipeline


@dataclass(frozen=True)
class ProcessedPost:
    post_id: str | None
    clean_text: str
    snippets: tuple[CodeSnippet, ...]  # studied languages only, comments gone
    sequence: BimodalSequence | None  # None when the post had no content


def preprocess_post(html: str, post_id: str | None = None,
                    rules: CommentRuleSet | None = None,
                    stopwords: frozenset[str] | None = None,
                    identifier=None) -> ProcessedPost:
    """Deterministic per-post pipeline: decompose, normalise, clean,
    identify and strip snippet comments, and pack the bimodal sequence."""
    rules = rules or default_comment_rules()
    doc = extract_parts(html, post_id)
    text = clean_text(nfc_normalize(" ".join(doc.paragraphs)), stopwords)

    kept: list[CodeSnippet] = []
    for raw in doc.code_blocks:
        normalized = nfc_normalize(raw)
        guess = identify_language(normalized, identifier) \
            if normalized.strip() else None
        if guess is None or guess.language not in STUDY_LANGUAGES:
            continue
        stripped = strip_comments(normalized, guess.language, rules)
        kept.append(CodeSnippet(stripped, guess.language))

    word_tokens = tokenize(text)
    code_tokens = [t for s in kept for t in tokenize(s.text)]
    sequence = None
    if word_tokens or code_tokens:
        sequence = pack_sequence(word_tokens, code_tokens)
    return ProcessedPost(post_id, text, tuple(kept), sequence)


# ---------------------------------------------------------------------------
# Sample-size arithmetic


def cochran_n(population: float | None, p: float, e: float, z: float) -> int:
    """Cochran sample size: n0 = z²p(1-p)/e², rounded up, then the finite-
    population correction n0/(1 + (n0-1)/N), rounded up again.

    ``population`` of None (or infinity) skips the correction.
    """
    if not 0.0 < p < 1.0:
        raise ConfigError("expected proportion must be inside (0, 1)")
    if e <= 0.0:
        raise ConfigError("margin of error must be positive")
    if z <= 0.0:
        raise ConfigError("confidence quantile must be positive")
    n0 = math.ceil(z * z * p * (1.0 - p) / (e * e))
    if population is None or math.isinf(population):
        return n0
    if population < 1:
        raise ConfigError("population size must be at least 1")
    corrected = n0 / (1.0 + (n0 - 1.0) / population)
    return math.ceil(corrected)
