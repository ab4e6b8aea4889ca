"""
LVNN checkpoint format, little-endian:

    magic "LVNN", version u32, layer count u32
    per layer: rows u32, cols u32, activation tag u32, weights f32[rows*cols], bias f32[rows]
    Adam: step u32, lr/beta1/beta2/eps f64,
          first moments per layer (weights, bias), then second moments per layer
    CRC32 u32 of every preceding byte

Values are stored as float32 whatever the model precision; a float64 model
reloads as its float32 cast.
"""
import io
import os
import struct
import zlib
from pathlib import Path

import numpy as np

from core.errors import (
    ChecksumMismatch,
    DimensionOverflow,
    MalformedHeader,
    TruncatedPayload,
    file_errors,
)
from core.io import MAX_VALUES
from pipeline.neuralnet.adam import AdamState
from pipeline.neuralnet.errors import NetworkError, checkpoint_errors
from pipeline.neuralnet.layers import DenseLayer
from pipeline.neuralnet.vae import VaeModel

CHECKPOINT_MAGIC = b"LVNN"
CHECKPOINT_VERSION = 1
HEADER = struct.Struct("<4sII")
LAYER_HEADER = struct.Struct("<III")
ADAM_HEADER = struct.Struct("<Idddd")
CRC = struct.Struct("<I")

ACTIVATION_TAGS = {"identity": 0, "elu": 1, "sigmoid": 2}
TAG_ACTIVATIONS = {tag: name for name, tag in ACTIVATION_TAGS.items()}

_FLOAT = np.dtype("<f4")


def _f32_bytes(array: np.ndarray) -> bytes:
    return np.ascontiguousarray(array, dtype=_FLOAT).tobytes()


def encode_checkpoint(model: VaeModel, state: AdamState | None = None) -> bytes:
    layers = model.layers
    if state is None:
        state = AdamState.zeros_like(model.parameters())
    _check_moments(model, state)

    buffer = io.BytesIO()
    buffer.write(HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(layers)))
    for layer in layers:
        buffer.write(LAYER_HEADER.pack(layer.out_features, layer.in_features, ACTIVATION_TAGS[layer.activation]))
        buffer.write(_f32_bytes(layer.weights))
        buffer.write(_f32_bytes(layer.bias))

    buffer.write(ADAM_HEADER.pack(state.step, state.lr, state.beta1, state.beta2, state.eps))
    for moments in (state.first_moments, state.second_moments):
        for array in moments:
            buffer.write(_f32_bytes(array))

    payload = buffer.getvalue()
    return payload + CRC.pack(zlib.crc32(payload))


def _check_moments(model: VaeModel, state: AdamState):
    params = model.parameters()
    for moments in (state.first_moments, state.second_moments):
        if len(moments) != len(params):
            raise NetworkError(checkpoint_errors[400].MomentShape.value.format(index=min(len(moments), len(params)) // 2))
        for position, (moment, param) in enumerate(zip(moments, params)):
            if moment.shape != param.shape:
                raise NetworkError(checkpoint_errors[400].MomentShape.value.format(index=position // 2))


def save_checkpoint(path, model: VaeModel, state: AdamState | None = None) -> Path:
    """Write through a temporary file so an interrupted save never replaces a good checkpoint."""
    path = Path(path)
    partial = path.with_name(path.name + ".partial")
    partial.write_bytes(encode_checkpoint(model, state))
    os.replace(partial, path)
    return path


class _Reader:
    def __init__(self, buffer: bytes, path):
        self.buffer = buffer
        self.path = path
        self.offset = 0

    def unpack(self, layout: struct.Struct) -> tuple:
        self._need(layout.size)
        values = layout.unpack_from(self.buffer, self.offset)
        self.offset += layout.size
        return values

    def floats(self, count: int, shape) -> np.ndarray:
        self._need(count * _FLOAT.itemsize)
        array = np.frombuffer(self.buffer, dtype=_FLOAT, count=count, offset=self.offset)
        self.offset += count * _FLOAT.itemsize
        return array.astype(np.float32).reshape(shape)

    def _need(self, size: int):
        if self.offset + size > len(self.buffer):
            raise TruncatedPayload(
                file_errors[400].TruncatedPayload.value.format(
                    path=self.path, expected=self.offset + size, found=len(self.buffer)
                )
            )


def _expected_activation(index: int, count: int) -> str:
    hidden = (count - 3) // 2
    if index == count - 1:
        return "sigmoid"
    if index in (hidden, hidden + 1):
        return "identity"
    return "elu"


def _check_chain(layers: list[DenseLayer], path):
    hidden = (len(layers) - 3) // 2
    model = VaeModel.from_layers(layers)
    pairs = list(zip(model.encoder, model.encoder[1:])) + list(zip(model.decoder, model.decoder[1:]))
    pairs += [(model.encoder[-1], model.mu_head), (model.encoder[-1], model.logvar_head)]
    for previous, layer in pairs:
        if previous.out_features != layer.in_features:
            raise MalformedHeader(
                checkpoint_errors[400].BrokenChain.value.format(
                    path=path, index=layers.index(layer), found=layer.in_features, expected=previous.out_features
                )
            )
    checks = (
        (model.decoder[0].in_features, model.latent_dim, hidden + 2),
        (model.input_dim, model.encoder[0].in_features, len(layers) - 1),
        (model.logvar_head.out_features, model.latent_dim, hidden + 1),
    )
    for found, expected, index in checks:
        if found != expected:
            raise MalformedHeader(
                checkpoint_errors[400].BrokenChain.value.format(path=path, index=index, found=found, expected=expected)
            )


def decode_checkpoint(buffer: bytes, path="<memory>") -> tuple[VaeModel, AdamState]:
    if len(buffer) < HEADER.size + CRC.size:
        raise MalformedHeader(
            file_errors[400].MalformedHeader.value.format(path=path, detail="file shorter than header")
        )
    magic, version, count = HEADER.unpack_from(buffer)
    if magic != CHECKPOINT_MAGIC:
        raise MalformedHeader(file_errors[400].MalformedHeader.value.format(path=path, detail=f"bad magic {magic!r}"))
    if version != CHECKPOINT_VERSION:
        raise MalformedHeader(
            file_errors[400].MalformedHeader.value.format(path=path, detail=f"unknown version {version}")
        )
    payload, (stored,) = buffer[:-CRC.size], CRC.unpack_from(buffer, len(buffer) - CRC.size)
    computed = zlib.crc32(payload)
    if stored != computed:
        raise ChecksumMismatch(
            file_errors[400].ChecksumMismatch.value.format(path=path, stored=stored, computed=computed)
        )
    if count < 5 or count % 2 == 0:
        raise MalformedHeader(checkpoint_errors[400].BadLayerCount.value.format(path=path, count=count))

    reader = _Reader(payload, path)
    reader.offset = HEADER.size
    layers = []
    for index in range(count):
        rows, cols, tag = reader.unpack(LAYER_HEADER)
        if rows * cols > MAX_VALUES:
            raise DimensionOverflow(
                file_errors[400].DimensionOverflow.value.format(path=path, detail=f"layer {index} is {rows}x{cols}")
            )
        expected = _expected_activation(index, count)
        if TAG_ACTIVATIONS.get(tag) != expected:
            raise MalformedHeader(
                checkpoint_errors[400].BadActivation.value.format(path=path, index=index, tag=tag, expected=expected)
            )
        weights = reader.floats(rows * cols, (rows, cols))
        bias = reader.floats(rows, (rows,))
        layers.append(DenseLayer(weights, bias, expected))
    _check_chain(layers, path)

    step, lr, beta1, beta2, eps = reader.unpack(ADAM_HEADER)
    moments = []
    for _ in range(2):
        moments.append([reader.floats(p.size, p.shape) for layer in layers for p in (layer.weights, layer.bias)])
    if reader.offset != len(payload):
        raise MalformedHeader(
            file_errors[400].MalformedHeader.value.format(
                path=path, detail=f"{len(payload) - reader.offset} trailing bytes"
            )
        )
    state = AdamState(moments[0], moments[1], step, lr, beta1, beta2, eps)
    return VaeModel.from_layers(layers), state


def load_checkpoint(path) -> tuple[VaeModel, AdamState]:
    return decode_checkpoint(Path(path).read_bytes(), path)


def load_model(path) -> VaeModel:
    return load_checkpoint(path)[0]
