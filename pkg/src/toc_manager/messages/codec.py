"""Deterministic binary codec for CAM, DENM and MCM payloads.

Layout (all integers big-endian):

    header   u16 BTP destination port, u16 destination port info (0),
             u8 protocol version, u8 message id, u32 station id
    CAM      u32 gen_time ms, u32 position mm, u16 speed cm/s,
             i16 acceleration cm/s^2, u8 SAE level
    DENM     u32 gen_time ms, u8 event type, u32 event position mm,
             u8 affected lane, u32 relevance distance mm
    MCM      u32 gen_time ms, u8 station type, u8 body tag
               tag 0 (vehicle): dynamics (u32 mm, u16 cm/s, i16 cm/s^2),
                   planned list, u8 desired flag [+ desired list],
                   response list (u16 advice id, u8 status)
               tag 1 (rsu): entry list (u32 target, advice list)
    advice   u8 kind, u16 advice id, then
               ToC: u8 target level, u8 trigger tag, u32 far/start, u32 near/end
               SafeSpot: u32 far mm, u32 near mm

Lists are a u8 element count followed by the elements. Waypoints are
u32 x mm and u16 v cm/s.
"""

from __future__ import annotations

import struct

from toc_manager.messages.models import (
    CAM_PORT,
    DENM_PORT,
    MCM_PORT,
    PROTOCOL_VERSION,
    AdviceKind,
    AdviceResponse,
    CamMessage,
    ComplianceStatus,
    DenmMessage,
    DistanceRange,
    Dynamics,
    EventType,
    McmMessage,
    Message,
    MessageId,
    RsuAdviceEntry,
    RsuSuggestedManeuverContainer,
    SafeSpot,
    StationType,
    TimeWindow,
    TransitionOfControl,
    TriggerKind,
    VehicleManeuverContainer,
    Waypoint,
)

_PORT_TO_ID = {
    CAM_PORT: MessageId.CAM,
    DENM_PORT: MessageId.DENM,
    MCM_PORT: MessageId.MCM,
}
_VEHICLE_BODY = 0
_RSU_BODY = 1
_MAX_LIST = 0xFF


class EncodeError(ValueError):
    """Raised when a message violates its invariants and cannot be encoded."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


class DecodeError(ValueError):
    """Base class for every decoding failure."""


class UnknownMessageError(DecodeError):
    """The BTP destination port is not one this codec routes."""


class MalformedPayloadError(DecodeError):
    """The payload is truncated, garbled or carries trailing bytes."""


def _mm(value: float) -> int:
    return int(round(value * 1000))


def _cm(value: float) -> int:
    return int(round(value * 100))


class _Writer:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def put(self, fmt: str, *values: int) -> None:
        self._parts.append(struct.pack(">" + fmt, *values))

    def count(self, name: str, items) -> None:
        if len(items) > _MAX_LIST:
            raise EncodeError(name, f"{name} holds {len(items)} elements, max {_MAX_LIST}")
        self.put("B", len(items))

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class _Reader:
    def __init__(self, data: bytes, offset: int = 0):
        self._data = data
        self._pos = offset

    def take(self, fmt: str) -> tuple:
        spec = struct.Struct(">" + fmt)
        if self._pos + spec.size > len(self._data):
            raise MalformedPayloadError(
                f"Truncated payload: need {spec.size} bytes at offset {self._pos}, "
                f"have {len(self._data) - self._pos}"
            )
        values = spec.unpack_from(self._data, self._pos)
        self._pos += spec.size
        return values

    def one(self, fmt: str) -> int:
        return self.take(fmt)[0]

    def finish(self) -> None:
        if self._pos != len(self._data):
            raise MalformedPayloadError(
                f"{len(self._data) - self._pos} trailing bytes after payload"
            )


# ---- encoding ------------------------------------------------------------

def _write_waypoints(w: _Writer, name: str, points) -> None:
    w.count(name, points)
    for p in points:
        w.put("IH", _mm(p.x), _cm(p.v))


def _write_advice(w: _Writer, advice) -> None:
    if isinstance(advice, TransitionOfControl):
        trigger = advice.trigger
        if isinstance(trigger, DistanceRange):
            tag, first, second = TriggerKind.DISTANCE_RANGE, _mm(trigger.far_x), _mm(trigger.near_x)
        else:
            tag, first, second = TriggerKind.TIME_WINDOW, trigger.start, trigger.end
        w.put("BHBBII", AdviceKind.TRANSITION_OF_CONTROL, advice.advice_id,
              advice.target_automation_level, tag, first, second)
    elif isinstance(advice, SafeSpot):
        w.put("BHII", AdviceKind.SAFE_SPOT, advice.advice_id,
              _mm(advice.range.far_x), _mm(advice.range.near_x))
    else:
        raise EncodeError("advice", f"Unsupported advice type {type(advice).__name__}")


def _write_body(w: _Writer, msg: Message) -> None:
    if isinstance(msg, CamMessage):
        w.put("IIHhB", msg.gen_time, _mm(msg.position), _cm(msg.speed),
              _cm(msg.acceleration), msg.sae_level)
    elif isinstance(msg, DenmMessage):
        w.put("IBIBI", msg.gen_time, msg.event_type, _mm(msg.event_position),
              msg.affected_lane, _mm(msg.relevance_distance))
    else:
        body = msg.body
        if isinstance(body, VehicleManeuverContainer):
            w.put("IBB", msg.gen_time, msg.station_type, _VEHICLE_BODY)
            d = body.dynamics
            w.put("IHh", _mm(d.position), _cm(d.speed), _cm(d.acceleration))
            _write_waypoints(w, "planned_trajectory", body.planned_trajectory)
            if body.desired_trajectory is None:
                w.put("B", 0)
            else:
                w.put("B", 1)
                _write_waypoints(w, "desired_trajectory", body.desired_trajectory)
            w.count("advice_responses", body.advice_responses)
            for r in body.advice_responses:
                w.put("HB", r.advice_id, r.compliance_status)
        else:
            w.put("IBB", msg.gen_time, msg.station_type, _RSU_BODY)
            w.count("entries", body.entries)
            for entry in body.entries:
                w.put("I", entry.target_station_id)
                w.count("advices", entry.advices)
                for advice in entry.advices:
                    _write_advice(w, advice)


def encode(msg: Message) -> bytes:
    """Encode a message into its BTP-framed byte representation."""
    if not isinstance(msg, (CamMessage, DenmMessage, McmMessage)):
        raise EncodeError("message", f"Cannot encode {type(msg).__name__}")
    problems = msg.validate()
    if problems:
        raise EncodeError(problems[0].split(" ", 1)[0], problems[0])
    w = _Writer()
    try:
        w.put("HHBBI", msg.port, 0, PROTOCOL_VERSION, _PORT_TO_ID[msg.port], msg.station_id)
        _write_body(w, msg)
    except struct.error as e:
        raise EncodeError("message", f"Field out of wire range: {e}") from e
    return w.getvalue()


# ---- decoding ------------------------------------------------------------

def _read_waypoints(r: _Reader) -> tuple[Waypoint, ...]:
    count = r.one("B")
    points = []
    for _ in range(count):
        x, v = r.take("IH")
        points.append(Waypoint(x / 1000, v / 100))
    return tuple(points)


def _read_advice(r: _Reader):
    kind, advice_id = r.take("BH")
    if kind == AdviceKind.TRANSITION_OF_CONTROL:
        level, tag, first, second = r.take("BBII")
        if tag == TriggerKind.DISTANCE_RANGE:
            trigger = DistanceRange(first / 1000, second / 1000)
        elif tag == TriggerKind.TIME_WINDOW:
            trigger = TimeWindow(first, second)
        else:
            raise MalformedPayloadError(f"Unknown ToC trigger tag {tag}")
        return TransitionOfControl(advice_id, level, trigger)
    if kind == AdviceKind.SAFE_SPOT:
        far, near = r.take("II")
        return SafeSpot(advice_id, DistanceRange(far / 1000, near / 1000))
    raise MalformedPayloadError(f"Reserved or unknown advice tag {kind}")


def _read_mcm(r: _Reader, station_id: int) -> McmMessage:
    gen_time, station_type, tag = r.take("IBB")
    if tag == _VEHICLE_BODY:
        pos, speed, accel = r.take("IHh")
        planned = _read_waypoints(r)
        desired = _read_waypoints(r) if r.one("B") else None
        responses = []
        for _ in range(r.one("B")):
            advice_id, status = r.take("HB")
            responses.append(AdviceResponse(advice_id, ComplianceStatus(status)))
        body = VehicleManeuverContainer(
            Dynamics(pos / 1000, speed / 100, accel / 100),
            planned, desired, tuple(responses),
        )
    elif tag == _RSU_BODY:
        entries = []
        for _ in range(r.one("B")):
            target = r.one("I")
            advices = tuple(_read_advice(r) for _ in range(r.one("B")))
            entries.append(RsuAdviceEntry(target, advices))
        body = RsuSuggestedManeuverContainer(tuple(entries))
    else:
        raise MalformedPayloadError(f"Unknown MCM body tag {tag}")
    return McmMessage(station_id, gen_time, StationType(station_type), body)


def decode(data: bytes) -> Message:
    """Decode bytes into a message.

    Every failure surfaces as a DecodeError subclass, including payloads
    that parse but break the message invariants.
    """
    data = bytes(data)
    if len(data) < 2:
        raise MalformedPayloadError(f"Payload too short for a BTP header: {len(data)} bytes")
    port = int.from_bytes(data[:2], "big")
    if port not in _PORT_TO_ID:
        raise UnknownMessageError(f"No handler for BTP port {port}")
    r = _Reader(data)
    try:
        _, _, version, message_id, station_id = r.take("HHBBI")
        if version != PROTOCOL_VERSION:
            raise MalformedPayloadError(f"Unsupported protocol version {version}")
        if message_id != _PORT_TO_ID[port]:
            raise MalformedPayloadError(
                f"Message id {message_id} does not match port {port}"
            )
        if port == CAM_PORT:
            gen_time, pos, speed, accel, level = r.take("IIHhB")
            msg: Message = CamMessage(station_id, gen_time, pos / 1000, speed / 100,
                                      accel / 100, level)
        elif port == DENM_PORT:
            gen_time, event, pos, lane, relevance = r.take("IBIBI")
            msg = DenmMessage(station_id, gen_time, EventType(event), pos / 1000,
                              lane, relevance / 1000)
        else:
            msg = _read_mcm(r, station_id)
        r.finish()
        problems = msg.validate()
        if problems:
            raise MalformedPayloadError(f"Decoded message is invalid: {problems[0]}")
    except DecodeError:
        raise
    except (struct.error, ValueError, IndexError) as e:
        raise MalformedPayloadError(f"Garbled payload: {e}") from e
    return msg
