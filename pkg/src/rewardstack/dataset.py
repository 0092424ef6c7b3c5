"""Subtitle-to-dialogue dataset builder.

Turns speaker-attributed .srt files into alternating user/assistant
sessions under temporal continuity constraints, splits sessions into
turn-level samples whose video clip never overlaps the target utterance,
and performs the leakage-safe train/test split by session id.
"""

import random
import re
from dataclasses import dataclass, field

_TIMESTAMP_RE = re.compile(r"^(\d{1,2}):(\d{2}):(\d{2})[,.](\d{1,3})$")
_CUE_TIMING_RE = re.compile(r"-->")

TAU_TURN_DEFAULT = 10.0
TAU_ROUND_DEFAULT = 20.0


class SrtParseError(ValueError):
    """Unrecoverable .srt structure problems (bad timestamps, inverted cues)."""


@dataclass(frozen=True)
class SubtitleLine:
    index: int
    start: float
    end: float
    speaker: str
    text: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.start < self.end:
            raise SrtParseError(
                f"cue {self.index}: need 0 <= start < end, got [{self.start}, {self.end}]"
            )
        if not self.speaker:
            raise SrtParseError(f"cue {self.index}: empty speaker")
        if not self.text.strip():
            raise SrtParseError(f"cue {self.index}: empty text")


@dataclass(frozen=True)
class DialogueSession:
    """Alternating user/assistant lines from one contiguous passage."""

    session_id: str
    film_id: str
    user_role: str
    assistant_role: str
    lines: list[SubtitleLine]

    @property
    def rounds(self) -> int:
        return len(self.lines) // 2


@dataclass(frozen=True)
class TrainingSample:
    """History up to and including u_k, target a_k, and its leak-free clip."""

    session_id: str
    film_id: str
    user_role: str
    assistant_role: str
    history: list[SubtitleLine]
    target: SubtitleLine
    clip_start: float
    clip_end: float


@dataclass
class SrtParseResult:
    lines: list[SubtitleLine] = field(default_factory=list)
    warnings: int = 0


def parse_timestamp(raw: str) -> float:
    """HH:MM:SS,mmm to seconds (millisecond precision)."""
    match = _TIMESTAMP_RE.match(raw.strip())
    if not match:
        raise SrtParseError(f"malformed timestamp: {raw!r}")
    hours, minutes, seconds, millis = match.groups()
    if int(minutes) >= 60 or int(seconds) >= 60:
        raise SrtParseError(f"malformed timestamp: {raw!r}")
    return int(hours) * 3600 + int(minutes) * 60 + int(seconds) + int(millis.ljust(3, "0")) / 1000.0


def parse_srt(content: str, speaker_overrides: dict[int, str] | None = None) -> SrtParseResult:
    """Parse speaker-attributed SRT text.

    Each cue's first text line must read "SPEAKER: utterance" unless the
    sidecar override maps the cue index to a speaker; cues without either
    are skipped and counted as warnings. Additional text lines of a cue are
    joined with spaces.
    """
    overrides = speaker_overrides or {}
    result = SrtParseResult()
    for block in re.split(r"\n\s*\n", content.strip()):
        raw_lines = [line.strip("﻿").rstrip() for line in block.splitlines()]
        raw_lines = [line for line in raw_lines if line.strip()]
        if not raw_lines:
            continue
        timing_at = next((i for i, line in enumerate(raw_lines) if _CUE_TIMING_RE.search(line)), None)
        if timing_at is None:
            result.warnings += 1
            continue
        try:
            index = int(raw_lines[0]) if timing_at == 1 else len(result.lines) + 1
        except ValueError:
            raise SrtParseError(f"malformed cue index line: {raw_lines[0]!r}")
        start_raw, _, end_raw = raw_lines[timing_at].partition("-->")
        start = parse_timestamp(start_raw)
        end = parse_timestamp(end_raw)
        text_lines = raw_lines[timing_at + 1 :]
        if not text_lines:
            result.warnings += 1
            continue
        if index in overrides:
            speaker = overrides[index]
            text = " ".join(text_lines).strip()
        else:
            speaker, colon, rest = text_lines[0].partition(":")
            if not colon or not speaker.strip():
                result.warnings += 1
                continue
            text = " ".join([rest.strip()] + text_lines[1:]).strip()
        if not text:
            result.warnings += 1
            continue
        result.lines.append(
            SubtitleLine(index=index, start=start, end=end, speaker=speaker.strip(), text=text)
        )
    return result


def _close_session(
    pending: list[SubtitleLine],
    sessions: list[list[SubtitleLine]],
) -> None:
    """Keep the valid prefix of a scan: trim an unpaired trailing user line."""
    if len(pending) % 2 == 1:
        pending = pending[:-1]
    if len(pending) >= 2:
        sessions.append(pending)


def build_sessions(
    lines: list[SubtitleLine],
    film_id: str,
    user_role: str,
    assistant_role: str,
    tau_turn: float = TAU_TURN_DEFAULT,
    tau_round: float = TAU_ROUND_DEFAULT,
    session_prefix: str | None = None,
) -> list[DialogueSession]:
    """Greedy single-pass session construction under the gap constraints.

    Only the two named roles participate (other speakers are filtered out).
    A session grows while lines alternate user/assistant and the gaps
    satisfy start(a_k) - end(u_k) <= tau_turn within a round and
    start(u_{k+1}) - end(a_k) <= tau_round across rounds (boundaries
    inclusive). Any violation closes the session, which is kept when it has
    at least one full round; scanning resumes at the next user-role line.
    """
    relevant = sorted(
        (line for line in lines if line.speaker in (user_role, assistant_role)),
        key=lambda line: (line.start, line.index),
    )
    raw_sessions: list[list[SubtitleLine]] = []
    pending: list[SubtitleLine] = []
    for line in relevant:
        if not pending:
            if line.speaker == user_role:
                pending = [line]
            continue
        expect_assistant = len(pending) % 2 == 1
        if expect_assistant:
            ok = line.speaker == assistant_role and line.start - pending[-1].end <= tau_turn
        else:
            ok = line.speaker == user_role and line.start - pending[-1].end <= tau_round
        if ok:
            pending.append(line)
        else:
            _close_session(pending, raw_sessions)
            pending = [line] if line.speaker == user_role else []
    _close_session(pending, raw_sessions)

    prefix = session_prefix or f"{film_id}:{user_role}+{assistant_role}"
    sessions = [
        DialogueSession(
            session_id=f"{prefix}:{n:04d}",
            film_id=film_id,
            user_role=user_role,
            assistant_role=assistant_role,
            lines=session_lines,
        )
        for n, session_lines in enumerate(raw_sessions)
    ]
    for session in sessions:
        validate_session(session, tau_turn, tau_round)
    return sessions


def validate_session(
    session: DialogueSession,
    tau_turn: float = TAU_TURN_DEFAULT,
    tau_round: float = TAU_ROUND_DEFAULT,
) -> None:
    """Full re-scan of the session invariants; raises on any violation."""
    lines = session.lines
    if len(lines) < 2 or len(lines) % 2 != 0:
        raise ValueError(f"{session.session_id}: needs complete rounds, got {len(lines)} lines")
    for i, line in enumerate(lines):
        expected = session.user_role if i % 2 == 0 else session.assistant_role
        if line.speaker != expected:
            raise ValueError(f"{session.session_id}: line {i} spoken by {line.speaker!r}, expected {expected!r}")
        if i > 0:
            if line.start < lines[i - 1].start:
                raise ValueError(f"{session.session_id}: timestamps regress at line {i}")
            gap = line.start - lines[i - 1].end
            limit = tau_turn if i % 2 == 1 else tau_round
            if gap > limit:
                raise ValueError(f"{session.session_id}: gap {gap:.3f}s exceeds {limit}s at line {i}")


def split_turns(session: DialogueSession) -> list[TrainingSample]:
    """One sample per assistant line; the clip ends before the target starts.

    Samples whose clip would overlap the target (end(u_k) >= start(a_k))
    are rejected rather than emitted.
    """
    samples = []
    for k in range(session.rounds):
        history = session.lines[: 2 * k + 1]
        target = session.lines[2 * k + 1]
        clip_start = session.lines[0].start
        clip_end = history[-1].end
        if not clip_end < target.start:
            continue
        samples.append(
            TrainingSample(
                session_id=session.session_id,
                film_id=session.film_id,
                user_role=session.user_role,
                assistant_role=session.assistant_role,
                history=list(history),
                target=target,
                clip_start=clip_start,
                clip_end=clip_end,
            )
        )
    return samples


def split_by_session(
    samples: list,
    test_fraction: float,
    seed: int,
    session_id_of=lambda sample: sample.session_id,
) -> tuple[list, list]:
    """Whole-session train/test split.

    Session ids are shuffled with the seed; sessions move to test until the
    test sample count first reaches test_fraction of the total. No session
    id ever appears on both sides.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    by_session: dict[str, list] = {}
    for sample in samples:
        by_session.setdefault(session_id_of(sample), []).append(sample)
    if len(by_session) < 2:
        raise ValueError(f"need at least 2 sessions to split, got {len(by_session)}")
    session_ids = sorted(by_session)
    random.Random(seed).shuffle(session_ids)
    target = test_fraction * len(samples)
    test_ids = set()
    count = 0
    for session_id in session_ids:
        if count >= target:
            break
        test_ids.add(session_id)
        count += len(by_session[session_id])
    train = [s for s in samples if session_id_of(s) not in test_ids]
    test = [s for s in samples if session_id_of(s) in test_ids]
    return train, test
