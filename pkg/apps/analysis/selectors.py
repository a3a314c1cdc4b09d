"""
Селекторы анализа устаревания: точный перебор моментов возмущения,
замкнутые формулы, члены разложения и оценка Монте-Карло.
"""

import itertools
import math
from collections.abc import Iterator
from fractions import Fraction

import numpy as np
from scipy.stats import norm

from apps.analysis.heads import LossHead, MlpHead, QuadraticHead
from apps.analysis.schemas import BiasReport, RelationCheck, SchemeSummary
from apps.analysis.types import BiasEstimate, DeltaMoments, FractionMatrix, PerturbationModel, Scheme
from apps.common.exceptions import ConfigError, EnumerationBudgetError
from apps.common.types import FloatArray
from apps.common.utils.parallel import parallel_map

MAX_ENUMERATION_SEGMENTS = 12
MIN_TRIALS = 1000
TRIALS_PER_CHUNK = 10_000


def _coefficients(model: PerturbationModel, scheme: Scheme, selected: set[int], kept: set[int]) -> list[tuple[Fraction, Fraction]]:
    """
    delta_j = a_j * h_j + b_j * h~_j для одного исхода.

    ET: выбранный сегмент не возмущён, остальные заменены устаревшими.
    SED: выбранный масштабирован на eta, сохранённый заменён устаревшим, выброшенный обнулён.
    """
    J, S, p = model.J, model.S, Fraction(model.p)
    eta = p + (1 - p) * Fraction(J, S)
    result = []

    for j in range(J):
        if j in selected:
            result.append((Fraction(0) if scheme is Scheme.ET else eta - 1, Fraction(0)))
        elif scheme is Scheme.ET or j in kept:
            result.append((Fraction(-1), Fraction(1)))
        else:
            result.append((Fraction(-1), Fraction(0)))

    return result


def _outcomes(model: PerturbationModel, scheme: Scheme) -> Iterator[tuple[Fraction, set[int], set[int]]]:
    """Все исходы (вероятность, выбранные, сохранённые) с ненулевой вероятностью."""
    p = Fraction(model.p)
    selections = list(itertools.combinations(range(model.J), model.S))
    base = Fraction(1, len(selections))

    for selection in selections:
        selected = set(selection)
        others = [j for j in range(model.J) if j not in selected]

        if scheme is Scheme.ET:
            yield base, selected, set(others)
            continue

        for mask in itertools.product((True, False), repeat=len(others)):
            kept = {j for j, keep in zip(others, mask, strict=True) if keep}
            probability = base * p ** len(kept) * (1 - p) ** (len(others) - len(kept))
            if probability:
                yield probability, selected, kept


def exact_delta_moments(model: PerturbationModel, scheme: Scheme | str) -> DeltaMoments:
    """
    Точные первые и вторые моменты возмущения перебором всех исходов.

    Перебираются все C(J, S) выборов и (для SED) все 2^(J-S) масок сохранения;
    суммы считаются в рациональной арифметике, поэтому замкнутые формулы
    проверяются на точное равенство.

    Args:
        model (PerturbationModel): Модель возмущения.
        scheme (Scheme | str): Схема.

    Raises:
        EnumerationBudgetError: J > 12.

    Returns:
        DeltaMoments: Моменты по сегментам и агрегированного возмущения.
    """
    scheme = Scheme(scheme)
    if model.J > MAX_ENUMERATION_SEGMENTS:
        raise EnumerationBudgetError(
            f"exact enumeration supports J <= {MAX_ENUMERATION_SEGMENTS}, got J={model.J}",
            details={"J": model.J, "S": model.S},
        )

    J, d = model.J, model.width
    fresh = [[Fraction(float(x)) for x in row] for row in np.asarray(model.fresh, dtype=np.float64)]
    stale = [[Fraction(float(x)) for x in row] for row in np.asarray(model.stale, dtype=np.float64)]

    segment_mean: FractionMatrix = [[Fraction(0)] * d for _ in range(J)]
    segment_square: FractionMatrix = [[Fraction(0)] * d for _ in range(J)]
    mean = [Fraction(0)] * d
    second: FractionMatrix = [[Fraction(0)] * d for _ in range(d)]
    count = 0

    for probability, selected, kept in _outcomes(model, scheme):
        count += 1
        coefficients = _coefficients(model, scheme, selected, kept)
        aggregate = [Fraction(0)] * d

        for j, (a, b) in enumerate(coefficients):
            for k in range(d):
                delta = a * fresh[j][k] + b * stale[j][k]
                segment_mean[j][k] += probability * delta
                segment_square[j][k] += probability * delta * delta
                aggregate[k] += delta

        aggregate = [value / J for value in aggregate]
        for k in range(d):
            mean[k] += probability * aggregate[k]
            for l in range(d):
                second[k][l] += probability * aggregate[k] * aggregate[l]

    return DeltaMoments(
        scheme=scheme,
        segment_mean=segment_mean,
        segment_square=segment_square,
        mean=mean,
        second=second,
        configurations=count,
    )


def closed_form_mean(model: PerturbationModel, scheme: Scheme | str) -> FractionMatrix:
    """
    E[delta_j]: ((J - S) / J) * (h~_j - h_j), для SED дополнительно умножается на p.
    """
    factor = Fraction(model.J - model.S, model.J)
    if Scheme(scheme) is Scheme.SED:
        factor *= Fraction(model.p)

    return [
        [factor * (Fraction(float(s)) - Fraction(float(h))) for h, s in zip(h_row, s_row, strict=True)]
        for h_row, s_row in zip(np.asarray(model.fresh).tolist(), np.asarray(model.stale).tolist(), strict=True)
    ]


def closed_form_square(model: PerturbationModel, scheme: Scheme | str) -> FractionMatrix:
    """
    E[delta_j ** 2] поэлементно.

    ET:  ((J - S) / J) * (h~ - h)^2
    SED: ((J - S) p / J) * (h~ - h)^2 + ((J - S)(1 - p)(J - pJ + pS) / (J S)) * h^2
    """
    J, S, p = model.J, model.S, Fraction(model.p)

    if Scheme(scheme) is Scheme.ET:
        stale_factor, fresh_factor = Fraction(J - S, J), Fraction(0)
    else:
        stale_factor = Fraction(J - S, J) * p
        fresh_factor = (J - S) * (1 - p) * (J - p * J + p * S) / (J * S)

    result = []
    for h_row, s_row in zip(np.asarray(model.fresh).tolist(), np.asarray(model.stale).tolist(), strict=True):
        row = []
        for h, s in zip(h_row, s_row, strict=True):
            h_frac, diff = Fraction(float(h)), Fraction(float(s)) - Fraction(float(h))
            row.append(stale_factor * diff * diff + fresh_factor * h_frac * h_frac)
        result.append(row)
    return result


def bias_terms(model: PerturbationModel, head: LossHead, moments: DeltaMoments) -> tuple[float, float]:
    """
    Члены разложения потерь вокруг чистого эмбеддинга.

    B = g^T E[Delta], R = tr(H E[Delta Delta^T]) / 2, где g и H - градиент и гессиан
    L(F'(.)) в чистом эмбеддинге (постоянная матрица разложения).

    Returns:
        tuple[float, float]: (B, R).
    """
    arrays = moments.as_arrays()
    z = model.clean
    B = float(head.gradient(z) @ arrays["mean"])
    R = 0.5 * float(np.trace(head.hessian(z) @ arrays["second"]))
    return B, R


def _sample_deltas(model: PerturbationModel, scheme: Scheme, trials: int, seed: np.random.SeedSequence) -> FloatArray:
    """Агрегированные возмущения для пачки случайных исходов (trials x d)."""
    rng = np.random.default_rng(seed)
    J, S = model.J, model.S

    order = np.argsort(rng.random((trials, J)), axis=1)
    selected = np.zeros((trials, J), dtype=bool)
    np.put_along_axis(selected, order[:, :S], True, axis=1)

    if scheme is Scheme.ET:
        fresh_coef = np.where(selected, 0.0, -1.0)
        stale_coef = np.where(selected, 0.0, 1.0)
    else:
        kept = rng.random((trials, J)) < model.p
        fresh_coef = np.where(selected, model.selected_weight - 1.0, -1.0)
        stale_coef = np.where(~selected & kept, 1.0, 0.0)

    return (fresh_coef @ model.fresh + stale_coef @ model.stale) / J


def monte_carlo_bias(
    model: PerturbationModel,
    head: LossHead,
    scheme: Scheme | str,
    trials: int = 100_000,
    seed: int = 0,
    threads: int = 1,
) -> BiasEstimate:
    """
    Оценка Монте-Карло E[L(z + Delta) - L(z)] и её членов первого и второго порядка.

    Исходы генерируются пачками по 10 000 с собственными дочерними сидами,
    поэтому результат не зависит от числа потоков.

    Args:
        model (PerturbationModel): Модель возмущения.
        head (LossHead): Тестовая голова.
        scheme (Scheme | str): Схема.
        trials (int): Число исходов (>= 1000).
        seed (int): Сид.
        threads (int): Потоки.

    Raises:
        ConfigError: trials < 1000.

    Returns:
        BiasEstimate: Средние и стандартные ошибки.
    """
    scheme = Scheme(scheme)
    if trials < MIN_TRIALS:
        raise ConfigError(f"monte_carlo_bias() needs trials >= {MIN_TRIALS}, got {trials}")

    chunks = [TRIALS_PER_CHUNK] * (trials // TRIALS_PER_CHUNK)
    if trials % TRIALS_PER_CHUNK:
        chunks.append(trials % TRIALS_PER_CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(chunks))

    deltas = np.concatenate(
        parallel_map(lambda item: _sample_deltas(model, scheme, item[0], item[1]), list(zip(chunks, seeds, strict=True)), threads)
    )

    z = model.clean
    gradient, hessian = head.gradient(z), head.hessian(z)
    total = head.value(z + deltas) - head.value(z)
    first = deltas @ gradient
    second = 0.5 * np.einsum("ti,ij,tj->t", deltas, hessian, deltas)

    def mean_se(values: FloatArray) -> tuple[float, float]:
        return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.shape[0]))

    (total_mean, total_se), (first_mean, first_se), (second_mean, second_se) = map(mean_se, (total, first, second))

    return BiasEstimate(
        scheme=scheme,
        trials=trials,
        total=total_mean,
        total_se=total_se,
        first_order=first_mean,
        first_order_se=first_se,
        second_order=second_mean,
        second_order_se=second_se,
    )


def _within(name: str, expected: float, observed: float, se: float, sigmas: float = 3.0) -> RelationCheck:
    """Совпадение в пределах sigmas стандартных ошибок."""
    diff = observed - expected
    tolerance = 1e-12 * max(1.0, abs(expected))

    if se > 0:
        z = diff / se
        passed = abs(diff) <= sigmas * se + tolerance
        return RelationCheck(
            name=name, passed=passed, expected=expected, observed=observed, z_score=z, p_value=float(2.0 * norm.sf(abs(z)))
        )

    return RelationCheck(name=name, passed=abs(diff) <= tolerance, expected=expected, observed=observed)


def _exact(name: str, left: object, right: object) -> RelationCheck:
    return RelationCheck(name=name, passed=left == right, detail="rational equality")


def bias_report(
    model: PerturbationModel,
    head: LossHead,
    trials: int = 100_000,
    seed: int = 0,
    threads: int = 1,
) -> BiasReport:
    """
    Полный отчёт режима bias: точные моменты обеих схем, замкнутые формулы,
    члены B и R, оценки Монте-Карло и проверка соотношений.

    Соотношения Монте-Карло для суммарного изменения потерь проверяются только
    для квадратичной головы: для неё разложение второго порядка точное.

    Args:
        model (PerturbationModel): Модель возмущения.
        head (LossHead): Тестовая голова.
        trials (int): Число исходов Монте-Карло.
        seed (int): Сид.
        threads (int): Потоки.

    Returns:
        BiasReport: Отчёт с результатами проверок.
    """
    moments = {scheme: exact_delta_moments(model, scheme) for scheme in Scheme}
    terms = {scheme: bias_terms(model, head, moments[scheme]) for scheme in Scheme}
    estimates = {scheme: monte_carlo_bias(model, head, scheme, trials, seed, threads) for scheme in Scheme}
    p = Fraction(model.p)

    relations = [
        _exact("et_first_moment", moments[Scheme.ET].segment_mean, closed_form_mean(model, Scheme.ET)),
        _exact("sed_first_moment", moments[Scheme.SED].segment_mean, closed_form_mean(model, Scheme.SED)),
        _exact(
            "sed_equals_p_times_et",
            moments[Scheme.SED].segment_mean,
            [[p * value for value in row] for row in moments[Scheme.ET].segment_mean],
        ),
        _exact("et_second_moment", moments[Scheme.ET].segment_square, closed_form_square(model, Scheme.ET)),
        _exact("sed_second_moment", moments[Scheme.SED].segment_square, closed_form_square(model, Scheme.SED)),
    ]

    at_one = exact_delta_moments(model.with_p(1.0), Scheme.SED)
    relations.append(
        _exact(
            "sed_p1_degrades_to_et",
            (at_one.segment_mean, at_one.segment_square, at_one.mean, at_one.second),
            (
                moments[Scheme.ET].segment_mean,
                moments[Scheme.ET].segment_square,
                moments[Scheme.ET].mean,
                moments[Scheme.ET].second,
            ),
        )
    )

    if isinstance(head, QuadraticHead):
        for scheme in Scheme:
            B, R = terms[scheme]
            relations.append(_within(f"{scheme.value}_monte_carlo_total", B + R, estimates[scheme].total, estimates[scheme].total_se))

    B_et = terms[Scheme.ET][0]
    relations.append(
        _within(
            "sed_bias_ratio",
            model.p * B_et,
            estimates[Scheme.SED].first_order,
            estimates[Scheme.SED].first_order_se,
        )
    )

    schemes = [
        SchemeSummary(
            scheme=scheme.value,
            segment_mean=moments[scheme].as_arrays()["segment_mean"].tolist(),
            segment_square=moments[scheme].as_arrays()["segment_square"].tolist(),
            bias_term=terms[scheme][0],
            regularization_term=terms[scheme][1],
            estimate={
                "trials": estimates[scheme].trials,
                "total": estimates[scheme].total,
                "total_se": estimates[scheme].total_se,
                "first_order": estimates[scheme].first_order,
                "first_order_se": estimates[scheme].first_order_se,
                "second_order": estimates[scheme].second_order,
                "second_order_se": estimates[scheme].second_order_se,
            },
        )
        for scheme in Scheme
    ]

    return BiasReport(
        J=model.J,
        S=model.S,
        p=model.p,
        head=type(head).__name__,
        schemes=schemes,
        relations=relations,
        precondition=head.precondition_norms(model.fresh, model.stale) if isinstance(head, MlpHead) else None,
    )
