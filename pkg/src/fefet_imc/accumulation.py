"""Digital accumulation behind the ADCs.

Combines the signed high-nibble and unsigned low-nibble value estimates into
an 8-bit-weight partial sum (x16 nibble shift), applies the 2^i input-bit
shift, and adds row-group partials at unit weight.  Plain integers carry the
state; the worst 8b x 8b, 128-row total stays below 2^23 so 32-bit hardware
headroom is never at risk.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


@dataclass
class AccumulatorState:
    running_total: int = 0
    input_bit_index: int = 0
    group_index: int = 0


def combine_nibbles(high_value: int, low_value: int) -> int:
    """8-bit-weight partial MAC from the two nibble estimates."""
    return 16 * int(high_value) + int(low_value)


def accumulate_input_bit(state: AccumulatorState, partial: int, bit_index: int) -> AccumulatorState:
    """Add the partial for input bit i with its 2^i significance."""
    if bit_index < 0 or bit_index > 7:
        raise ConfigError(f"input bit index must be 0..7, got {bit_index}")
    state.running_total += int(partial) << bit_index
    state.input_bit_index = bit_index
    return state


def accumulate_row_group(state: AccumulatorState, group_partial: int) -> AccumulatorState:
    """Add one 32-row group partial; groups are spatial, so unit weight."""
    if state.group_index >= 4:
        raise ConfigError("macro has only 4 row groups")
    state.running_total += int(group_partial)
    state.group_index += 1
    return state
