"""Green supply chain reference model.

Forward chain: raw material supplier -> manufacturer -> wholesaler ->
retailer -> customer.  Reverse chain: customer -> collecting point /
recycling plant / disassembly plant -> secondary material market ->
manufacturer.  Every production pays one CASH of recycling fee that the
environment agency passes on to the disassembly plant.

All prices are one CASH token per unit.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, fields, replace
from importlib import resources

from .core import ArcInscription, ColorSet, Marking, Multiset, Net, Place, Transition
from .engine import SimulationConfig

COLOR_SETS = (
    ColorSet("CASH", ("cash",)),
    ColorSet("MATERIAL", ("material",)),
    ColorSet("PRODUCTS", ("product",)),
    ColorSet("USED", ("used",)),
    ColorSet("WASTE", ("waste",)),
)
_TOKEN = {cs.name: cs.values[0] for cs in COLOR_SETS}

# name, color set, description
PLACES = (
    ("P0", "CASH", "Manufacturer's cashflow"),
    ("P0'", "MATERIAL", "Manufacturer's pre-production stage"),
    ("P0''", "PRODUCTS", "Manufacturer's post-production"),
    ("P1", "CASH", "Raw material supplier cash flow"),
    ("P1'", "MATERIAL", "Raw material supplier warehouse"),
    ("P2", "CASH", "Wholesaler's cashflow"),
    ("P2'", "PRODUCTS", "Wholesaler with the product"),
    ("P3", "CASH", "Customer's cashflow"),
    ("P3'", "PRODUCTS", "Customer with the product"),
    ("P3''", "USED", "Customer with the used/finished product"),
    ("P4", "CASH", "Retailer's cashflow"),
    ("P4'", "PRODUCTS", "Retailer with the product"),
    ("P5", "CASH", "Collecting point cashflow"),
    ("P5'", "USED", "Collecting point with the used products"),
    ("P6", "CASH", "Recycling plant cashflow"),
    ("P6'", "USED", "Used products waiting to be recycled"),
    ("P6''", "USED", "Used products after recycling process"),
    ("P7", "CASH", "Disassembly plant cashflow"),
    ("P7'", "USED", "Disassembly plant (used / recycled products)"),
    ("P7''", "MATERIAL", "New materials obtained after disassembly"),
    ("P8", "WASTE", "Final disposal for waste"),
    ("P9", "CASH", "Secondary supply market cashflow"),
    ("P9'", "MATERIAL", "Secondary supply market warehouse"),
    ("P10", "CASH", "Manufacturer's mandatory recycling fee"),
    ("P11", "CASH", "Government environment agency"),
)
_COLOR_OF = {name: cs for name, cs, _ in PLACES}

TRANSITION_DESCRIPTIONS = {
    "T0": "Production process",
    "T1": "Manufacturer orders material from raw material supplier",
    "T2": "Manufacturer buys material from secondary material market",
    "T3": "Wholesaler buys products from manufacturer",
    "T4": "Customer buys products from manufacturer",
    "T5": "Retailer buys products from wholesaler",
    "T6": "Customer buys products from wholesaler",
    "T7": "Customer buys products from retailer",
    "T8": "Customer uses the products",
    "T9": "Customer sends used products to collecting point",
    "T10": "Customer sends used products to recycling plant",
    "T11": "Customer sends used products to disassembly plant",
    "T12": "Collecting point sends used products to recycling plant",
    "T13": "Collecting point sends used products to disassembly plant",
    "T14": "Recycling plant recycles the used products",
    "T15": "Recycling plant sends used products to disassembly plant",
    "T16": "Disassembly process",
    "T17": "Disassembly plant sells materials to secondary material market",
    "T18": "Manufacturer pays fee to government environment agency",
    "T19": "Government environment agency subsidizes the disassembly plants",
}

# actor name -> cash place
CASH_PLACES = {
    "manufacturer": "P0",
    "supplier": "P1",
    "wholesaler": "P2",
    "customer": "P3",
    "retailer": "P4",
    "collecting": "P5",
    "recycling": "P6",
    "disassembly": "P7",
    "secondary": "P9",
    "agency": "P11",
}


@dataclass(frozen=True)
class GscmParameters:
    raw_material_stock: int = 1000
    manufacturer_cash: int = 5000
    supplier_cash: int = 1000
    wholesaler_cash: int = 1000
    retailer_cash: int = 1000
    customer_cash: int = 5000
    collecting_cash: int = 1000
    recycling_cash: int = 1000
    disassembly_cash: int = 1000
    secondary_cash: int = 1000
    agency_cash: int = 0
    # T16 yields per disassembled unit
    material_yield: int = 1
    waste_yield: int = 1

    def __post_init__(self) -> None:
        if self.raw_material_stock < 1:
            raise ValueError("raw_material_stock must be at least 1")
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    def with_cash(self, **cash: int) -> GscmParameters:
        """Copy with actor cash overridden, e.g. ``with_cash(customer=3)``."""
        unknown = set(cash) - set(CASH_PLACES)
        if unknown:
            raise ValueError(f"unknown actor(s): {', '.join(sorted(unknown))}")
        return replace(self, **{f"{actor}_cash": n for actor, n in cash.items()})

    def cash(self, actor: str) -> int:
        return getattr(self, f"{actor}_cash")


def _arc(place: str, n: int = 1) -> tuple[str, ArcInscription]:
    return place, ArcInscription.constant(_TOKEN[_COLOR_OF[place]], n)


def _trade(name: str, buyer_cash: str, seller_stock: str, seller_cash: str, buyer_stock: str,
           inhibit: tuple[str, ...] = ()) -> Transition:
    # cash goes to the seller, goods go to the buyer
    return Transition(
        name,
        inputs=(_arc(buyer_cash), _arc(seller_stock)),
        outputs=(_arc(seller_cash), _arc(buyer_stock)),
        inhibitors=tuple((p, 1) for p in inhibit),
    )


def _move(name: str, src: str, dst: str) -> Transition:
    return Transition(name, inputs=(_arc(src),), outputs=(_arc(dst),))


def build_gscm_net(params: GscmParameters | None = None) -> Net:
    """Build the 25-place, 20-transition green supply chain net."""
    p = params or GscmParameters()
    places = tuple(
        Place(name, cs, capacity=p.raw_material_stock if name == "P1'" else None)
        for name, cs, _ in PLACES
    )
    t16_out = []
    if p.material_yield:
        t16_out.append(_arc("P7''", p.material_yield))
    if p.waste_yield:
        t16_out.append(_arc("P8", p.waste_yield))
    transitions = (
        Transition(
            "T0",
            inputs=(_arc("P0'"), _arc("P0")),
            outputs=(_arc("P0''"), _arc("P10")),
        ),
        _trade("T1", "P0", "P1'", "P1", "P0'", inhibit=("P0'",)),
        _trade("T2", "P0", "P9'", "P9", "P0'", inhibit=("P0'",)),
        _trade("T3", "P2", "P0''", "P0", "P2'"),
        _trade("T4", "P3", "P0''", "P0", "P3'"),
        _trade("T5", "P4", "P2'", "P2", "P4'"),
        _trade("T6", "P3", "P2'", "P2", "P3'"),
        _trade("T7", "P3", "P4'", "P4", "P3'"),
        _move("T8", "P3'", "P3''"),
        # the receiving actor pays the customer for the used product
        _trade("T9", "P5", "P3''", "P3", "P5'"),
        _trade("T10", "P6", "P3''", "P3", "P6'"),
        _trade("T11", "P7", "P3''", "P3", "P7'"),
        _trade("T12", "P6", "P5'", "P5", "P6'"),
        _trade("T13", "P7", "P5'", "P5", "P7'"),
        _move("T14", "P6'", "P6''"),
        _trade("T15", "P7", "P6''", "P6", "P7'"),
        Transition("T16", inputs=(_arc("P7'"),), outputs=tuple(t16_out)),
        _trade("T17", "P9", "P7''", "P7", "P9'"),
        _move("T18", "P10", "P11"),
        _move("T19", "P11", "P7"),
    )
    initial = {"P1'": Multiset({"material": p.raw_material_stock})}
    for actor, place in CASH_PLACES.items():
        if p.cash(actor):
            initial[place] = Multiset({"cash": p.cash(actor)})
    return Net("gscm", COLOR_SETS, (), places, transitions, initial)


def conservation_violations(net: Net, firing_counts: Mapping[str, int], final: Marking) -> list[str]:
    """Check the structural flow identities of a GSCM run; returns the broken ones.

    ``firing_counts`` and ``final`` describe any run from ``net.initial()``.
    """
    f = lambda t: firing_counts.get(t, 0)  # noqa: E731
    init = net.initial()
    raw = init.total("P1'")
    checks = (
        ("T1 + T2 - T0 = delta P0'", f("T1") + f("T2") - f("T0"), final.total("P0'") - init.total("P0'")),
        ("T0 - T18 = P10", f("T0") - f("T18"), final.total("P10") - init.total("P10")),
        ("T18 - T19 = P11", f("T18") - f("T19"), final.total("P11") - init.total("P11")),
        ("T4 + T6 + T7 - T8 = P3'", f("T4") + f("T6") + f("T7") - f("T8"), final.total("P3'") - init.total("P3'")),
        ("T8 - T9 - T10 - T11 = P3''", f("T8") - f("T9") - f("T10") - f("T11"),
         final.total("P3''") - init.total("P3''")),
        ("T1 = raw stock drawn", f("T1"), raw - final.total("P1'")),
    )
    broken = [f"{label}: {lhs} != {rhs}" for label, lhs, rhs in checks if lhs != rhs]
    if f("T1") > raw:
        broken.append(f"T1 fired {f('T1')} times with only {raw} raw units")
    if not f("T9") + f("T10") + f("T11") <= f("T8") <= f("T4") + f("T6") + f("T7"):
        broken.append("reverse flow ordering T9+T10+T11 <= T8 <= T4+T6+T7")
    return broken


def reference_scenario() -> tuple[Net, SimulationConfig]:
    """Default model with the 50,000-firing simulation setup."""
    return build_gscm_net(), SimulationConfig(max_steps=50_000, seed=1, record_trace=False)


# Initial marking used for the full state-space study.  The default marking
# (1000 units of raw stock, thousands of CASH tokens) has far too many
# interleavings to enumerate; this one has a state space of the same order
# as the published one.
STATESPACE_PARAMETERS = GscmParameters(
    raw_material_stock=4,
    manufacturer_cash=5,
    supplier_cash=0,
    wholesaler_cash=1,
    retailer_cash=1,
    customer_cash=3,
    collecting_cash=1,
    recycling_cash=1,
    disassembly_cash=1,
    secondary_cash=1,
    agency_cash=0,
)

# Small enough for a naive recursive enumerator.
SCALED_PARAMETERS = GscmParameters(
    raw_material_stock=3,
    manufacturer_cash=3,
    supplier_cash=0,
    wholesaler_cash=1,
    retailer_cash=1,
    customer_cash=1,
    collecting_cash=1,
    recycling_cash=1,
    disassembly_cash=1,
    secondary_cash=1,
    agency_cash=0,
)


def statespace_scenario() -> Net:
    return build_gscm_net(STATESPACE_PARAMETERS)


def scaled_gscm_net() -> Net:
    return build_gscm_net(SCALED_PARAMETERS)


def bundled_model_text() -> str:
    """Text of the bundled ``models/gscm.cpn`` (the default parameters)."""
    return resources.files("cpnkit").joinpath("models/gscm.cpn").read_text(encoding="utf-8")


def load_bundled_model() -> Net:
    from .dsl import parse_net

    return parse_net(bundled_model_text())
