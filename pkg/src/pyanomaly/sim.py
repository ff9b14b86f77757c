"""Stochastic growth-relaxation simulator."""
from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from .const import CSV_COLUMNS
from .exceptions import DivergenceError, InvalidStateError, ParseError
from .models import PerturbationEvent, SimConfig, Trajectory

_LOGGER = logging.getLogger(__name__)


def _require_finite(*values: float) -> None:
    if not all(math.isfinite(v) for v in values):
        raise InvalidStateError("Simulator state must be finite", {"values": values})


def excitation_rate(p: float, forcing: float, eta: float, cfg: SimConfig) -> float:
    """Return dP/dt in the excitation phase.

    Logistic growth toward p_sat plus the constant forcing term and the
    perturbation value.
    """
    _require_finite(p, forcing, eta)
    return cfg.p_coeff * p * (1.0 - p / cfg.p_sat) + forcing + eta


def relaxation_rate(p: float, cfg: SimConfig) -> float:
    """Return dP/dt in the relaxation phase."""
    _require_finite(p)
    return -cfg.alpha_relax * (p - cfg.p0)


def auxiliary_rate(aux: float, p: float, cfg: SimConfig) -> float:
    """Return dT/dt: first-order lag toward aux_gain * P, saturating at t_sat."""
    return cfg.aux_rate * (cfg.aux_gain * p * (1.0 - aux / cfg.t_sat) - aux)


class PerturbationProcess:
    """Gradient-triggered rectangular pulse generator.

    At most one pulse is active at a time. When no pulse is active and the
    previous rate magnitude reaches grad_threshold, a pulse starts with
    probability pert_prob; its amplitude and length in steps are drawn
    uniformly from the configured ranges.
    """

    def __init__(
        self,
        cfg: SimConfig,
        rng: np.random.Generator,
        last_index: int | None = None,
    ) -> None:
        """Initialize an idle process; pulses are clipped at last_index."""
        self.cfg = cfg
        self.rng = rng
        self.last_index = last_index
        self.log: list[PerturbationEvent] = []
        self._amplitude = 0.0
        self._remaining = 0

    @property
    def active(self) -> bool:
        """Return whether a pulse is currently active."""
        return self._remaining > 0

    def __call__(self, prev_rate: float, index: int) -> float:
        """Return the perturbation value eta for step index."""
        if not self.active and abs(prev_rate) >= self.cfg.grad_threshold:
            if self.rng.random() < self.cfg.pert_prob:
                amp_lo, amp_hi = self.cfg.pert_amp_range
                len_lo, len_hi = self.cfg.pert_len_range
                self._amplitude = float(self.rng.uniform(amp_lo, amp_hi))
                self._remaining = int(self.rng.integers(len_lo, len_hi + 1))

                end = index + self._remaining - 1
                if self.last_index is not None:
                    end = min(end, self.last_index)

                self.log.append(PerturbationEvent(index, end, self._amplitude))
                _LOGGER.debug(
                    "Pulse at step %s: amplitude %.4f, %s steps",
                    index,
                    self._amplitude,
                    self._remaining,
                )

        if not self.active:
            return 0.0

        self._remaining -= 1
        return self._amplitude


def perturbation_process(
    prev_rate: float,
    cfg: SimConfig,
    rng: np.random.Generator,
    state: PerturbationProcess | None = None,
    index: int = 0,
) -> tuple[float, PerturbationProcess]:
    """Return eta for one step and the pulse state to pass to the next step.

    A fresh idle state is created when state is None; callers must thread the
    returned state through later calls for a started pulse to persist.
    """
    if state is None:
        state = PerturbationProcess(cfg, rng)
    return state(prev_rate, index), state


def simulate(cfg: SimConfig) -> Trajectory:
    """Integrate the growth-relaxation system with explicit Euler steps."""
    cfg.validate()

    n = cfg.n_steps
    ramp = cfg.ramp_index
    forcing_value = cfg.forcing
    times = np.arange(n, dtype=np.float64) * cfg.dt
    primary = np.empty(n, dtype=np.float64)
    auxiliary = np.empty(n, dtype=np.float64)
    forcing = np.where(np.arange(n) <= ramp, forcing_value, 0.0)
    eta = np.zeros(n, dtype=np.float64)

    rng = np.random.default_rng(cfg.seed)
    process = PerturbationProcess(cfg, rng, last_index=min(ramp, n - 2))

    primary[0] = cfg.initial_state
    auxiliary[0] = cfg.aux_init
    prev_rate = 0.0

    _LOGGER.debug("Simulating %s steps, excitation through step %s", n, ramp)

    for k in range(n - 1):
        p = primary[k]
        try:
            if k <= ramp:
                eta[k] = process(prev_rate, k)
                rate = excitation_rate(p, forcing_value, eta[k], cfg)
            else:
                rate = relaxation_rate(p, cfg)
        except InvalidStateError as exc:
            raise DivergenceError(
                f"Non-finite state at step {k}",  # noqa: EM102
                step=k,
            ) from exc

        primary[k + 1] = p + cfg.dt * rate
        auxiliary[k + 1] = auxiliary[k] + cfg.dt * auxiliary_rate(auxiliary[k], p, cfg)

        if not (math.isfinite(primary[k + 1]) and math.isfinite(auxiliary[k + 1])):
            raise DivergenceError(
                f"Non-finite state at step {k + 1}",  # noqa: EM102
                step=k + 1,
            )

        prev_rate = rate

    _LOGGER.info("Simulated %s samples with %s perturbations", n, len(process.log))

    return Trajectory(
        times=times,
        primary=primary,
        auxiliary=auxiliary,
        forcing=forcing,
        perturbation_log=process.log,
        eta=eta,
    )


def truth_path(csv_path: str | Path) -> Path:
    """Return the companion truth document path of a trajectory CSV."""
    path = Path(csv_path)
    return path.with_name(f"{path.stem}.truth.json")


def write_trajectory(traj: Trajectory, path: str | Path) -> Path:
    """Write the trajectory CSV and its truth document; return the truth path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    frame = pd.DataFrame(
        {
            CSV_COLUMNS[0]: traj.times,
            CSV_COLUMNS[1]: traj.primary,
            CSV_COLUMNS[2]: traj.auxiliary,
            CSV_COLUMNS[3]: traj.forcing,
        },
    )
    frame.to_csv(path, index=False)

    truth = truth_path(path)
    truth.write_text(
        json.dumps([event.as_dict for event in traj.perturbation_log], indent=2),
        encoding="utf-8",
    )
    _LOGGER.info("Wrote trajectory to %s and truth to %s", path, truth)
    return truth


def load_truth(path: str | Path) -> list[PerturbationEvent]:
    """Read a truth document."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        events = [PerturbationEvent.from_dict(entry) for entry in data]
    except FileNotFoundError as exc:
        raise ParseError(f"{path} not found") from exc  # noqa: EM102
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"Corrupt truth document {path}") from exc  # noqa: EM102
    return sorted(events, key=lambda e: e.start)
