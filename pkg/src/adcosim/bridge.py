"""Config-driven converter bridge relaying messages between the two dialects.

The bridge is organized the way the interface it stands in for is: a static
registry of named converter plugins (instead of dynamically loaded
binaries), a converter list managing plugin lifecycle, and one abstract
transformation contract (:class:`MessageConverter`) with per-message
specializations that perform field mapping, unit conversion, and body-frame
transforms.

Unit regimes: Dialect A carries actuator fractions and road-wheel radians;
Dialect B carries percents, with steering percent defined as percent of the
configured maximum road-wheel angle.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable

from .bus import Bus, Subscription, UnknownTopic
from .frames import euler_cm_to_apollo, euler_to_quaternion, flu_to_rfu, quaternion_to_euler, rfu_to_flu, euler_apollo_to_cm
from .messages import (
    ChassisMsg,
    ControlMsg,
    Dialect,
    InvalidPayload,
    LocalizationMsg,
    MessageEnvelope,
    Payload,
    SensorObjectList,
    StartupMsg,
)

DEFAULT_MAX_STEER_ANGLE = 0.52


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnknownPlugin(KeyError):
    pass


class DuplicateMapping(ValueError):
    pass


class SubscribeFailure(RuntimeError):
    pass


class AlreadyRunning(RuntimeError):
    pass


class OutOfRange(ValueError):
    pass


class Direction(str, Enum):
    A_TO_B = "a_to_b"
    B_TO_A = "b_to_a"


@dataclass(frozen=True)
class BridgeParams:
    max_steer_angle: float = DEFAULT_MAX_STEER_ANGLE


# ---------------------------------------------------------------------------
# Pure conversion functions

def convert_localization_a_to_b(msg: LocalizationMsg) -> LocalizationMsg:
    """Relay localization from the dynamics side to the ADS side.

    Body vectors are remapped FLU -> RFU; the orientation quaternion is
    rebuilt from the remapped Euler angles; the heading field passes through
    unchanged (both sides measure it East = 0, counterclockwise positive)
    and position stays in the shared map frame.
    """
    euler_cm, _ = quaternion_to_euler(msg.orientation)
    euler_apollo = euler_cm_to_apollo(euler_cm)
    return LocalizationMsg(
        position=msg.position,
        orientation=euler_to_quaternion(euler_apollo),
        linear_velocity=flu_to_rfu(msg.linear_velocity),
        linear_acceleration=flu_to_rfu(msg.linear_acceleration),
        angular_velocity=flu_to_rfu(msg.angular_velocity),
        heading=msg.heading,
    )


def convert_localization_b_to_a(msg: LocalizationMsg) -> LocalizationMsg:
    """Inverse of :func:`convert_localization_a_to_b` (used for round-trip checks)."""
    euler_apollo, _ = quaternion_to_euler(msg.orientation)
    euler_cm = euler_apollo_to_cm(euler_apollo)
    return LocalizationMsg(
        position=msg.position,
        orientation=euler_to_quaternion(euler_cm),
        linear_velocity=rfu_to_flu(msg.linear_velocity),
        linear_acceleration=rfu_to_flu(msg.linear_acceleration),
        angular_velocity=rfu_to_flu(msg.angular_velocity),
        heading=msg.heading,
    )


def convert_control_b_to_a(msg: ControlMsg, params: BridgeParams = BridgeParams()) -> ControlMsg:
    """ADS control percents to dynamics-side fractions and road-wheel radians."""
    if not -100.0 <= msg.steering_target <= 100.0:
        raise OutOfRange(f"steering percent {msg.steering_target} outside [-100, 100]")
    if not 0.0 <= msg.throttle <= 100.0 or not 0.0 <= msg.brake <= 100.0:
        raise OutOfRange("throttle/brake percent outside [0, 100]")
    scale = params.max_steer_angle / 100.0
    return ControlMsg(
        steering_rate=msg.steering_rate * scale,
        steering_target=msg.steering_target * scale,
        throttle=msg.throttle / 100.0,
        brake=msg.brake / 100.0,
        gear=msg.gear,
        lamps=msg.lamps,
    )


def convert_control_a_to_b(msg: ControlMsg, params: BridgeParams = BridgeParams()) -> ControlMsg:
    """Inverse direction of the control mapping (fractions/radians to percents)."""
    if not 0.0 <= msg.throttle <= 1.0 or not 0.0 <= msg.brake <= 1.0:
        raise OutOfRange("throttle/brake fraction outside [0, 1]")
    if abs(msg.steering_target) > params.max_steer_angle + 1e-12:
        raise OutOfRange(f"steering angle {msg.steering_target} exceeds max {params.max_steer_angle}")
    scale = 100.0 / params.max_steer_angle
    return ControlMsg(
        steering_rate=msg.steering_rate * scale,
        steering_target=msg.steering_target * scale,
        throttle=msg.throttle * 100.0,
        brake=msg.brake * 100.0,
        gear=msg.gear,
        lamps=msg.lamps,
    )


def convert_chassis_a_to_b(msg: ChassisMsg, params: BridgeParams = BridgeParams()) -> ChassisMsg:
    scale = 100.0 / params.max_steer_angle
    return ChassisMsg(
        speed=msg.speed,
        throttle=msg.throttle * 100.0,
        brake=msg.brake * 100.0,
        steering=msg.steering * scale,
        steering_rate=msg.steering_rate * scale,
        gear=msg.gear,
        turn_signal=msg.turn_signal,
    )


def convert_chassis_b_to_a(msg: ChassisMsg, params: BridgeParams = BridgeParams()) -> ChassisMsg:
    scale = params.max_steer_angle / 100.0
    return ChassisMsg(
        speed=msg.speed,
        throttle=msg.throttle / 100.0,
        brake=msg.brake / 100.0,
        steering=msg.steering * scale,
        steering_rate=msg.steering_rate * scale,
        gear=msg.gear,
        turn_signal=msg.turn_signal,
    )


def convert_sensor_objects_a_to_b(msg: SensorObjectList) -> SensorObjectList:
    # Object data is map-frame on both sides; only the wire spelling differs.
    return msg


def convert_startup_a_to_b(msg: StartupMsg) -> StartupMsg:
    return msg


# ---------------------------------------------------------------------------
# Plugin layer

class MessageConverter(ABC):
    """Unified transformation template all plugins implement."""

    plugin_name: str = ""
    direction: Direction = Direction.A_TO_B

    def __init__(self, params: BridgeParams):
        self.params = params

    @abstractmethod
    def convert(self, payload: Payload) -> Payload:
        ...

    def _expect(self, payload: Payload, cls: type) -> None:
        if not isinstance(payload, cls):
            raise InvalidPayload(
                f"{self.plugin_name} expected {cls.__name__}, got {type(payload).__name__}"
            )


class LocalizationAToB(MessageConverter):
    plugin_name = "localization_a_to_b"
    direction = Direction.A_TO_B

    def convert(self, payload: Payload) -> Payload:
        self._expect(payload, LocalizationMsg)
        return convert_localization_a_to_b(payload)


class ChassisAToB(MessageConverter):
    plugin_name = "chassis_a_to_b"
    direction = Direction.A_TO_B

    def convert(self, payload: Payload) -> Payload:
        self._expect(payload, ChassisMsg)
        return convert_chassis_a_to_b(payload, self.params)


class SensorObjectsAToB(MessageConverter):
    plugin_name = "sensor_objects_a_to_b"
    direction = Direction.A_TO_B

    def convert(self, payload: Payload) -> Payload:
        self._expect(payload, SensorObjectList)
        return convert_sensor_objects_a_to_b(payload)


class StartupAToB(MessageConverter):
    plugin_name = "startup_a_to_b"
    direction = Direction.A_TO_B

    def convert(self, payload: Payload) -> Payload:
        self._expect(payload, StartupMsg)
        return convert_startup_a_to_b(payload)


class ControlBToA(MessageConverter):
    plugin_name = "control_b_to_a"
    direction = Direction.B_TO_A

    def convert(self, payload: Payload) -> Payload:
        self._expect(payload, ControlMsg)
        return convert_control_b_to_a(payload, self.params)


CONVERTER_REGISTRY: dict[str, type[MessageConverter]] = {
    cls.plugin_name: cls
    for cls in (LocalizationAToB, ChassisAToB, SensorObjectsAToB, StartupAToB, ControlBToA)
}


def resolve_plugin(name: str) -> type[MessageConverter]:
    try:
        return CONVERTER_REGISTRY[name]
    except KeyError:
        raise UnknownPlugin(name) from None


# ---------------------------------------------------------------------------
# Configuration

@dataclass(frozen=True)
class ConverterSpec:
    plugin_name: str
    a_topic: str
    b_channel: str
    direction: Direction


@dataclass(frozen=True)
class BridgeConfig:
    converters: tuple[ConverterSpec, ...]
    params: BridgeParams = BridgeParams()
    endpoint_a: str = "127.0.0.1:0"
    endpoint_b: str = "127.0.0.1:0"


def _validate_config(specs: list[ConverterSpec]) -> None:
    seen: set[tuple[str, str]] = set()
    for spec in specs:
        plugin = resolve_plugin(spec.plugin_name)
        if plugin.direction is not spec.direction:
            raise ParseError(
                f"plugin {spec.plugin_name!r} has direction {plugin.direction.value}, "
                f"config says {spec.direction.value}"
            )
        pair = (spec.a_topic, spec.b_channel)
        if pair in seen:
            raise DuplicateMapping(f"duplicate mapping {pair}")
        seen.add(pair)


def load_bridge_config(path: str | Path) -> BridgeConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    if not isinstance(raw, dict):
        raise ParseError("bridge config must be a JSON object")
    specs = []
    for i, item in enumerate(raw.get("converters", [])):
        try:
            specs.append(
                ConverterSpec(
                    plugin_name=item["plugin"],
                    a_topic=item["a_topic"],
                    b_channel=item["b_channel"],
                    direction=Direction(item["direction"]),
                )
            )
        except (KeyError, ValueError) as exc:
            raise ParseError(f"converter entry {i} invalid: {exc}") from exc
    _validate_config(specs)
    endpoints = raw.get("endpoints", {})
    return BridgeConfig(
        converters=tuple(specs),
        params=BridgeParams(max_steer_angle=float(raw.get("max_steer_angle_rad", DEFAULT_MAX_STEER_ANGLE))),
        endpoint_a=endpoints.get("a", "127.0.0.1:0"),
        endpoint_b=endpoints.get("b", "127.0.0.1:0"),
    )


def default_bridge_config() -> BridgeConfig:
    from importlib import resources

    with resources.files("adcosim.data").joinpath("bridge_default.json").open("r") as fh:
        text = fh.read()
    raw = json.loads(text)
    specs = tuple(
        ConverterSpec(item["plugin"], item["a_topic"], item["b_channel"], Direction(item["direction"]))
        for item in raw["converters"]
    )
    _validate_config(list(specs))
    return BridgeConfig(
        converters=specs,
        params=BridgeParams(max_steer_angle=float(raw.get("max_steer_angle_rad", DEFAULT_MAX_STEER_ANGLE))),
        endpoint_a=raw.get("endpoints", {}).get("a", "127.0.0.1:0"),
        endpoint_b=raw.get("endpoints", {}).get("b", "127.0.0.1:0"),
    )


# ---------------------------------------------------------------------------
# Runtime

class ConverterState(str, Enum):
    CREATED = "created"
    RUNNING = "running"
    DESTROYED = "destroyed"


@dataclass
class ConverterEntry:
    spec: ConverterSpec
    converter: MessageConverter
    state: ConverterState = ConverterState.CREATED
    subscription: Subscription | None = None
    source_bus: Bus | None = None


RelayHook = Callable[[MessageEnvelope, str, Payload, Dialect], None]


class Bridge:
    """Owns the converter list and relays between the two buses."""

    def __init__(self, config: BridgeConfig):
        self.config = config
        self.converter_list: list[ConverterEntry] = [
            ConverterEntry(spec=spec, converter=resolve_plugin(spec.plugin_name)(config.params))
            for spec in config.converters
        ]
        self._running = False
        self.relay_hook: RelayHook | None = None

    def start(self, bus_a: Bus, bus_b: Bus) -> None:
        if self._running:
            raise AlreadyRunning("bridge already started")
        for entry in self.converter_list:
            if entry.spec.direction is Direction.A_TO_B:
                source_bus, source, dest_bus, dest = bus_a, entry.spec.a_topic, bus_b, entry.spec.b_channel
            else:
                source_bus, source, dest_bus, dest = bus_b, entry.spec.b_channel, bus_a, entry.spec.a_topic
            try:
                entry.subscription = source_bus.subscribe(
                    source, callback=self._relay_fn(entry, dest_bus, dest)
                )
            except UnknownTopic as exc:
                raise SubscribeFailure(f"cannot subscribe {source!r}: topic unknown") from exc
            entry.source_bus = source_bus
            entry.state = ConverterState.RUNNING
        self._running = True

    def _relay_fn(self, entry: ConverterEntry, dest_bus: Bus, dest: str):
        source_dialect = Dialect.A if entry.spec.direction is Direction.A_TO_B else Dialect.B

        def relay(env: MessageEnvelope) -> None:
            converted = entry.converter.convert(env.payload)
            dest_bus.publish(dest, MessageEnvelope.for_channel(dest, env.stamp_s, converted))
            if self.relay_hook is not None:
                self.relay_hook(env, dest, converted, source_dialect)

        return relay

    def shutdown(self) -> None:
        """Destroy all converter instances; idempotent."""
        for entry in self.converter_list:
            if entry.subscription is not None and entry.source_bus is not None:
                entry.source_bus.unsubscribe(entry.subscription)
                entry.subscription = None
            entry.state = ConverterState.DESTROYED
        self._running = False

    @property
    def running(self) -> bool:
        return self._running


def start_bridge(config: BridgeConfig, bus_a: Bus, bus_b: Bus) -> Bridge:
    bridge = Bridge(config)
    bridge.start(bus_a, bus_b)
    return bridge


class SocketBridge:
    """Standalone bridge process body: relays between two remote bus servers."""

    def __init__(self, config: BridgeConfig, endpoint_a: str, endpoint_b: str):
        import threading

        from .socketbus import BusClient

        self.config = config
        sources_a = sorted(
            spec.a_topic for spec in config.converters if spec.direction is Direction.A_TO_B
        )
        sources_b = sorted(
            spec.b_channel for spec in config.converters if spec.direction is Direction.B_TO_A
        )
        self._client_a = BusClient(endpoint_a, subscribe_topics=sources_a)
        self._client_b = BusClient(endpoint_b, subscribe_topics=sources_b)
        self._converters_a = {
            spec.a_topic: (resolve_plugin(spec.plugin_name)(config.params), spec.b_channel)
            for spec in config.converters
            if spec.direction is Direction.A_TO_B
        }
        self._converters_b = {
            spec.b_channel: (resolve_plugin(spec.plugin_name)(config.params), spec.a_topic)
            for spec in config.converters
            if spec.direction is Direction.B_TO_A
        }
        self.relayed = 0
        self._threads = [
            threading.Thread(target=self._pump, args=(self._client_a, self._converters_a, self._client_b), daemon=True),
            threading.Thread(target=self._pump, args=(self._client_b, self._converters_b, self._client_a), daemon=True),
        ]
        for thread in self._threads:
            thread.start()

    def _pump(self, source_client, converters, dest_client) -> None:
        from .socketbus import TransportClosed

        while True:
            try:
                env = source_client.next_envelope()
            except TransportClosed:
                return
            entry = converters.get(env.channel)
            if entry is None:
                continue
            converter, dest = entry
            dest_client.publish(dest, converter.convert(env.payload), env.stamp_s)
            self.relayed += 1

    def close(self) -> None:
        self._client_a.close()
        self._client_b.close()
        for thread in self._threads:
            thread.join(timeout=2.0)
