"""
Backbone (передача сообщений + readout) и голова (MLP).

Backbone и голова делят одно хранилище параметров с префиксами
"backbone." и "head.", чтобы дообучение головы могло обновлять только её.
"""

from dataclasses import dataclass

import numpy as np
from loguru import logger as log

from apps.common.exceptions import TapeError, WidthMismatchError
from apps.diffcore import ops
from apps.diffcore.params import ParamStore, glorot_uniform
from apps.diffcore.tensor import Tensor, current_tape, no_grad
from apps.diffcore.types import ForwardCounter, GradMode, LayerType, ModelConfig, NodeBatch, Readout

BACKBONE_PREFIX = "backbone."
HEAD_PREFIX = "head."


@dataclass(frozen=True, slots=True)
class LinearSpec:
    """Имена весов и смещения одного линейного слоя."""

    weight: str
    bias: str


def _register_linear(store: ParamStore, rng: np.random.Generator, name: str, fan_in: int, fan_out: int) -> LinearSpec:
    store.add(f"{name}.weight", glorot_uniform(rng, fan_in, fan_out))
    store.add(f"{name}.bias", np.zeros(fan_out))
    return LinearSpec(weight=f"{name}.weight", bias=f"{name}.bias")


class Backbone:
    """
    Backbone F: pre-слои, слои передачи сообщений, post-слои, readout.

    Каждый слой - линейное преобразование и ReLU. SAGE-слой применяет W к [h || mean(h_соседей)],
    GCN-слой - к среднему по замкнутой окрестности. Readout - среднее (или сумма) по узлам.
    """

    def __init__(self, config: ModelConfig, store: ParamStore, rng: np.random.Generator) -> None:
        self.config = config
        self.store = store
        self.counter = ForwardCounter()

        width = config.in_width
        self.pre: list[LinearSpec] = []
        for i in range(config.pre_layers):
            self.pre.append(_register_linear(store, rng, f"{BACKBONE_PREFIX}pre.{i}", width, config.hidden_width))
            width = config.hidden_width

        self.mp: list[LinearSpec] = []
        for i in range(config.mp_layers):
            fan_in = 2 * width if config.layer_type is LayerType.SAGE else width
            self.mp.append(_register_linear(store, rng, f"{BACKBONE_PREFIX}mp.{i}", fan_in, config.hidden_width))
            width = config.hidden_width

        self.post: list[LinearSpec] = []
        for i in range(config.post_layers):
            self.post.append(_register_linear(store, rng, f"{BACKBONE_PREFIX}post.{i}", width, config.hidden_width))
            width = config.hidden_width

    @property
    def in_width(self) -> int:
        return self.config.in_width

    @property
    def out_width(self) -> int:
        return self.config.hidden_width

    def _dense(self, x: Tensor, spec: LinearSpec) -> Tensor:
        return ops.relu(ops.linear(x, self.store[spec.weight], self.store[spec.bias]))

    def forward(self, batch: NodeBatch) -> Tensor:
        """Прямой проход без учёта режима (режим задаёт forward_segment)."""
        x = Tensor(batch.features)

        for spec in self.pre:
            x = self._dense(x, spec)

        for spec in self.mp:
            if self.config.layer_type is LayerType.SAGE:
                x = self._dense(ops.concat_columns(x, ops.propagate(batch.mean_operator, x)), spec)
            else:
                x = self._dense(ops.propagate(batch.closed_mean_operator, x), spec)

        for spec in self.post:
            x = self._dense(x, spec)

        return ops.mean_rows(x) if self.config.readout is Readout.MEAN else ops.sum_rows(x)


class Head:
    """Голова F': MLP со скрытыми слоями ReLU и линейным выходом."""

    def __init__(self, config: ModelConfig, store: ParamStore, rng: np.random.Generator) -> None:
        self.config = config
        self.store = store

        width = config.hidden_width
        self.hidden: list[LinearSpec] = []
        for i in range(config.head_hidden_layers):
            self.hidden.append(_register_linear(store, rng, f"{HEAD_PREFIX}hidden.{i}", width, config.hidden_width))

        self.output = _register_linear(store, rng, f"{HEAD_PREFIX}out", width, config.out_width)

    @property
    def in_width(self) -> int:
        return self.config.hidden_width

    def forward(self, embedding: Tensor) -> Tensor:
        x = embedding
        for spec in self.hidden:
            x = ops.relu(ops.linear(x, self.store[spec.weight], self.store[spec.bias]))
        return ops.linear(x, self.store[self.output.weight], self.store[self.output.bias])


@dataclass
class Model:
    """Модель целиком: конфиг, параметры, backbone, голова."""

    config: ModelConfig
    params: ParamStore
    backbone: Backbone
    head: Head

    @property
    def backbone_names(self) -> list[str]:
        return self.params.names(BACKBONE_PREFIX)

    @property
    def head_names(self) -> list[str]:
        return self.params.names(HEAD_PREFIX)

    @property
    def counter(self) -> ForwardCounter:
        return self.backbone.counter


def build_model(config: ModelConfig) -> Model:
    """
    Создаёт модель с сеяной инициализацией (смещения нулевые).

    Args:
        config (ModelConfig): Архитектура.

    Returns:
        Model: Модель.
    """
    rng = np.random.default_rng(config.seed)
    store = ParamStore()
    backbone = Backbone(config, store, rng)
    head = Head(config, store, rng)

    log.debug(f"Model built: {len(store)} tensors, d_in={config.in_width}, d_h={config.hidden_width}")
    return Model(config=config, params=store, backbone=backbone, head=head)


def forward_segment(backbone: Backbone, segment: NodeBatch, grad: GradMode | str = GradMode.ENABLED) -> Tensor:
    """
    Эмбеддинг сегмента h = F(segment).

    Оба режима исполняют один и тот же код, поэтому значения побитно совпадают.
    В режиме enabled проход пишется на активную ленту и резервирует node_count
    активаций (с проверкой бюджета); в режиме disabled ничего не удерживается.

    Args:
        backbone (Backbone): Backbone.
        segment (NodeBatch): Сегмент (или граф целиком).
        grad (GradMode | str): Режим.

    Raises:
        WidthMismatchError: Ширина признаков не равна ширине входа backbone.
        TapeError: Режим enabled без активной ленты.
        BudgetExceededError: Резерв активаций превышает бюджет ленты.

    Returns:
        Tensor: Вектор ширины d_h.
    """
    if segment.feature_width != backbone.in_width:
        raise WidthMismatchError(
            f"Segment feature width {segment.feature_width} != backbone input width {backbone.in_width}"
        )

    mode = GradMode(grad)

    if mode is GradMode.ENABLED:
        tape = current_tape()
        if tape is None:
            raise TapeError("grad-enabled forward requires an active tape")
        tape.reserve(segment.node_count)
        embedding = backbone.forward(segment)
    else:
        with no_grad():
            embedding = backbone.forward(segment)

    backbone.counter.add(segment.node_count, mode)
    return embedding


def head_forward(head: Head, graph_embedding: Tensor) -> Tensor:
    """
    Предсказание y = F'(h) для вектора (d_h,) или пакета (B, d_h).

    Raises:
        WidthMismatchError: Ширина входа не равна d_h.

    Returns:
        Tensor: Логиты (C,) / (B, C) или скаляры (1,) / (B, 1).
    """
    if graph_embedding.shape[-1] != head.in_width:
        raise WidthMismatchError(f"Head input width {graph_embedding.shape[-1]} != d_h {head.in_width}")
    return head.forward(graph_embedding)
