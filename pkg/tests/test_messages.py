"""Tests for message models and the binary codec."""

from pathlib import Path

import numpy as np
import pytest

from toc_manager.messages.codec import (
    DecodeError,
    EncodeError,
    MalformedPayloadError,
    UnknownMessageError,
    decode,
    encode,
)
from toc_manager.messages.models import (
    AdviceKind,
    AdviceResponse,
    CamMessage,
    ComplianceStatus,
    DenmMessage,
    DistanceRange,
    Dynamics,
    McmMessage,
    RsuAdviceEntry,
    RsuSuggestedManeuverContainer,
    SafeSpot,
    StationType,
    TimeWindow,
    TransitionOfControl,
    UnsupportedAdviceError,
    VehicleManeuverContainer,
    Waypoint,
    make_advice,
)

GOLDEN_FILE = Path(__file__).parent / "data" / "golden_vectors.txt"

GOLDEN_MESSAGES = {
    "cam_cruise": CamMessage(station_id=7, gen_time=100, position=1000.0, speed=16.67,
                             acceleration=0.0, sae_level=3),
    "denm_roadworks": DenmMessage(station_id=1, gen_time=0, event_position=0.0,
                                  relevance_distance=500.0),
    "mcm_rsu_advice": McmMessage(
        1, 1000, StationType.RSU,
        RsuSuggestedManeuverContainer((
            RsuAdviceEntry(7, (
                TransitionOfControl(1, 0, DistanceRange(406.67, 406.67)),
                SafeSpot(2, DistanceRange(75.0, 0.0)),
            )),
        )),
    ),
    "mcm_vehicle_ack": McmMessage(
        7, 200, StationType.VEHICLE,
        VehicleManeuverContainer(
            Dynamics(900.0, 16.67, 0.0),
            (Waypoint(883.333, 16.67),),
            None,
            (AdviceResponse(1, ComplianceStatus.FOLLOWING),),
        ),
    ),
}


def load_golden_vectors(path: Path) -> dict[str, bytes]:
    vectors = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, hex_payload = (part.strip() for part in line.split("=", 1))
        vectors[name] = bytes.fromhex(hex_payload)
    return vectors


# ---- random message generators -------------------------------------------

def _distance(rng, hi=5000.0):
    return float(rng.integers(0, int(hi * 1000))) / 1000


def _speed(rng):
    return float(rng.integers(0, 5000)) / 100


def _trajectory(rng, length):
    xs = sorted(rng.choice(4_000_000, size=length, replace=False), reverse=True)
    return tuple(Waypoint(int(x) / 1000, _speed(rng)) for x in xs)


def _advices(rng):
    advices = []
    if rng.random() < 0.8:
        near = _distance(rng)
        far = near + _distance(rng, 500.0)
        if rng.random() < 0.5:
            trigger = DistanceRange(far, near)
        else:
            start = int(rng.integers(0, 100_000))
            trigger = TimeWindow(start, start + int(rng.integers(0, 10_000)))
        advices.append(TransitionOfControl(int(rng.integers(0, 0xFFFF)),
                                           int(rng.integers(0, 6)), trigger))
    if rng.random() < 0.8:
        near = _distance(rng)
        advices.append(SafeSpot(int(rng.integers(0, 0xFFFF)),
                                DistanceRange(near + _distance(rng, 100.0), near)))
    return tuple(advices)


def random_message(rng):
    station = int(rng.integers(0, 2**32))
    gen_time = int(rng.integers(0, 2**32))
    kind = rng.integers(0, 4)
    if kind == 0:
        return CamMessage(station, gen_time, _distance(rng), _speed(rng),
                          float(rng.integers(-500, 500)) / 100, int(rng.integers(0, 6)))
    if kind == 1:
        return DenmMessage(station, gen_time, event_position=_distance(rng),
                           affected_lane=int(rng.integers(0, 4)),
                           relevance_distance=_distance(rng) + 1.0)
    if kind == 2:
        desired = _trajectory(rng, int(rng.integers(1, 5))) if rng.random() < 0.3 else None
        responses = tuple(
            AdviceResponse(int(rng.integers(0, 0xFFFF)), ComplianceStatus(int(rng.integers(0, 3))))
            for _ in range(int(rng.integers(0, 4)))
        )
        body = VehicleManeuverContainer(
            Dynamics(_distance(rng), _speed(rng), float(rng.integers(-300, 300)) / 100),
            _trajectory(rng, int(rng.integers(1, 6))),
            desired,
            responses,
        )
        return McmMessage(station, gen_time, StationType.VEHICLE, body)
    entries = tuple(
        RsuAdviceEntry(int(rng.integers(0, 2**32)), _advices(rng))
        for _ in range(int(rng.integers(0, 4)))
    )
    return McmMessage(station, gen_time, StationType.RSU, RsuSuggestedManeuverContainer(entries))


class TestModels:
    def test_values_quantized_on_construction(self):
        cam = CamMessage(7, 0, position=123.45678, speed=16.667)
        assert cam.position == 123.457
        assert cam.speed == 16.67

    def test_distance_range(self):
        r = DistanceRange(75.0, 0.0)
        assert r.contains(50.0)
        assert not r.contains(80.0)
        assert DistanceRange(0.0, 75.0).validate()

    def test_time_window_validation(self):
        assert TimeWindow(100, 200).validate() == []
        assert TimeWindow(200, 100).validate()

    def test_make_advice(self):
        toc = make_advice(AdviceKind.TRANSITION_OF_CONTROL, advice_id=3)
        assert toc.kind == AdviceKind.TRANSITION_OF_CONTROL
        spot = make_advice(1, advice_id=4, range=DistanceRange(75.0, 0.0))
        assert isinstance(spot, SafeSpot)

    @pytest.mark.parametrize("kind", [AdviceKind.GAP, AdviceKind.LANE_CHANGE, AdviceKind.SPEED])
    def test_reserved_advice_kinds_rejected(self, kind):
        with pytest.raises(UnsupportedAdviceError):
            make_advice(kind, advice_id=1)

    def test_one_advice_per_kind_per_entry(self):
        entry = RsuAdviceEntry(7, (TransitionOfControl(1), TransitionOfControl(2)))
        assert any("more than one" in p for p in entry.validate())

    def test_advices_for_station(self):
        body = RsuSuggestedManeuverContainer((
            RsuAdviceEntry(7, (TransitionOfControl(1),)),
            RsuAdviceEntry(8, (SafeSpot(1),)),
        ))
        assert [a.kind for a in body.advices_for(7)] == [AdviceKind.TRANSITION_OF_CONTROL]
        assert body.advices_for(9) == ()

    def test_trajectory_must_decrease(self):
        body = VehicleManeuverContainer(
            Dynamics(100.0, 5.0), (Waypoint(90.0, 5.0), Waypoint(95.0, 5.0))
        )
        assert any("strictly decreasing" in p for p in body.validate())

    def test_station_type_matches_body(self):
        msg = McmMessage(1, 0, StationType.VEHICLE, RsuSuggestedManeuverContainer())
        assert msg.validate()


class TestGoldenVectors:
    @pytest.fixture(scope="class")
    def vectors(self):
        return load_golden_vectors(GOLDEN_FILE)

    def test_every_vector_has_a_message(self, vectors):
        assert set(vectors) == set(GOLDEN_MESSAGES)

    @pytest.mark.parametrize("name", sorted(GOLDEN_MESSAGES))
    def test_encode_matches_vector(self, vectors, name):
        assert encode(GOLDEN_MESSAGES[name]).hex() == vectors[name].hex()

    @pytest.mark.parametrize("name", sorted(GOLDEN_MESSAGES))
    def test_decode_matches_message(self, vectors, name):
        assert decode(vectors[name]) == GOLDEN_MESSAGES[name]


class TestCodec:
    def test_round_trip_randomized(self):
        rng = np.random.default_rng(20240601)
        for _ in range(10_000):
            msg = random_message(rng)
            assert decode(encode(msg)) == msg

    def test_encoding_is_deterministic(self):
        msg = GOLDEN_MESSAGES["mcm_rsu_advice"]
        assert encode(msg) == encode(msg)

    def test_invalid_message_not_encoded(self):
        with pytest.raises(EncodeError):
            encode(CamMessage(7, 0, position=-1.0, speed=1.0))
        with pytest.raises(EncodeError):
            encode(McmMessage(7, 0, StationType.VEHICLE,
                              VehicleManeuverContainer(Dynamics(10.0, 1.0), ())))

    def test_list_too_long(self):
        points = tuple(Waypoint(1000.0 - i, 1.0) for i in range(256))
        body = VehicleManeuverContainer(Dynamics(1001.0, 1.0), points)
        with pytest.raises(EncodeError) as exc:
            encode(McmMessage(7, 0, StationType.VEHICLE, body))
        assert exc.value.field == "planned_trajectory"

    def test_unknown_port(self):
        data = bytearray(encode(GOLDEN_MESSAGES["cam_cruise"]))
        data[0:2] = (4000).to_bytes(2, "big")
        with pytest.raises(UnknownMessageError):
            decode(bytes(data))

    def test_truncated_payload(self):
        data = encode(GOLDEN_MESSAGES["denm_roadworks"])
        for cut in range(len(data)):
            with pytest.raises(DecodeError):
                decode(data[:cut])

    def test_trailing_bytes(self):
        data = encode(GOLDEN_MESSAGES["cam_cruise"]) + b"\x00"
        with pytest.raises(MalformedPayloadError):
            decode(data)

    def test_version_mismatch(self):
        data = bytearray(encode(GOLDEN_MESSAGES["cam_cruise"]))
        data[4] = 3
        with pytest.raises(MalformedPayloadError):
            decode(bytes(data))

    def test_decoded_invariants_checked(self):
        data = bytearray(encode(GOLDEN_MESSAGES["cam_cruise"]))
        data[-1] = 9
        with pytest.raises(MalformedPayloadError, match="sae_level"):
            decode(bytes(data))

    def test_decoded_station_type_must_match_body(self):
        data = bytearray(encode(GOLDEN_MESSAGES["mcm_rsu_advice"]))
        # station type byte follows the 10-byte header and the u32 gen_time
        assert data[14] == StationType.RSU
        data[14] = StationType.VEHICLE
        with pytest.raises(MalformedPayloadError, match="station_type"):
            decode(bytes(data))

    def test_decoded_trajectory_must_decrease(self):
        body = VehicleManeuverContainer(
            Dynamics(100.0, 5.0), (Waypoint(90.0, 5.0), Waypoint(80.0, 5.0))
        )
        data = bytearray(encode(McmMessage(7, 0, StationType.VEHICLE, body)))
        # second waypoint x sits after preamble, dynamics, count and first waypoint
        offset = 10 + 6 + 8 + 1 + 6
        data[offset:offset + 4] = (95_000).to_bytes(4, "big")
        with pytest.raises(MalformedPayloadError):
            decode(bytes(data))

    def test_reserved_advice_tag(self):
        data = bytearray(encode(GOLDEN_MESSAGES["mcm_rsu_advice"]))
        # first advice kind byte follows header, MCM preamble, entry count, target and advice count
        assert data[22] == AdviceKind.TRANSITION_OF_CONTROL
        data[22] = AdviceKind.GAP
        with pytest.raises(MalformedPayloadError):
            decode(bytes(data))

    def test_fuzz_never_raises_unexpected_errors(self):
        rng = np.random.default_rng(7)
        seeds = [encode(m) for m in GOLDEN_MESSAGES.values()]
        for i in range(100_000):
            if i % 2:
                data = rng.integers(0, 256, size=int(rng.integers(0, 64)), dtype=np.uint8).tobytes()
            else:
                data = bytearray(seeds[i // 2 % len(seeds)])
                for _ in range(int(rng.integers(1, 4))):
                    data[int(rng.integers(0, len(data)))] = int(rng.integers(0, 256))
                data = bytes(data[: int(rng.integers(0, len(data) + 1))])
            try:
                msg = decode(data)
            except DecodeError:
                continue
            assert decode(encode(msg)) == msg
