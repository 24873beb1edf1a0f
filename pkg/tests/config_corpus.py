"""Shared configuration corpus: valid texts and texts with one known error class each."""

BASE = """\
model = kelvin_voigt
domain.length = 1.0
modes = 8
integrator.method = direct_rk4
integrator.dt = 0.001
integrator.t_end = 0.05
init.u0 = mode_sum 1:1.0 2:-0.0625
init.u1 = zero
"""


def variant(drop=(), **changes):
    lines = []
    seen = set()
    for line in BASE.splitlines():
        key = line.split("=")[0].strip()
        if key in drop:
            continue
        if key in changes:
            line = f"{key} = {changes[key]}"
            seen.add(key)
        lines.append(line)
    lines += [f"{k} = {v}" for k, v in changes.items() if k not in seen]
    return "\n".join(lines) + "\n"


def v(**kw):
    return variant(**{k.replace("__", "."): val for k, val in kw.items()})


VALID = [
    BASE,
    "# leading comment\n\n" + BASE + "   # trailing comment line\n",
    v(model="bt_prototype", domain__length="3.141592653589793", modes="1", init__u0="single_mode 1 1.0"),
    v(integrator__method="implicit_euler_resolvent", integrator__dt="0.01"),
    v(integrator__method="yosida_rk4", integrator__alpha="0.01"),
    v(sample_stride="10"),
    v(init__u1="mode_sum 1:0.3, 3:-0.01"),
    v(init__u0="profile x*(1-x)"),
    v(init__u1="profile 0.3*sin(pi*x) + exp(-x)/10"),
    v(output__trace_path="runs/a.csv", output__report_path="runs/a.txt", output__plot_script="runs/a.gp"),
    v(tolerances__resolvent="1e-13", tolerances__identity="1e-7"),
    variant(drop=("domain.length",)) + "domain.geometry = rectangle\ndomain.lengths = 1.0 2.0\n",
    variant(drop=("domain.length", "init.u1"))
    + "domain.geometry = rectangle\ndomain.lengths = 1.0, 1.0\ninit.u1 = profile x*y*(1-x)*(1-y)\n",
    v(domain__length="0.1", integrator__t_end="1e-2"),
    v(integrator__dt="0.1", integrator__t_end="0.1"),
    v(init__u0="mode_sum 8:1e-300"),
    v(model="kelvin_voigt", modes="16", init__u0="single_mode 16 -2.5"),
    v(domain__geometry="interval"),
    v(integrator__t_end="250.0", sample_stride="100"),
    v(integrator__dt="0.3333333333333333", integrator__t_end="1.0"),
    v(init__u0="profile sqrt(x)*sin(pi*x)**2"),
]

# (text, expected error kind, expected line number or None)
INVALID = [
    (BASE + "colour = red\n", "unknown-key", 9),
    (variant(drop=("modes",)), "missing-key", 0),
    (v(modes="eight"), "type-mismatch", 3),
    (v(modes="0"), "range-violation", 3),
    (BASE + "this line has no equals sign\n", "syntax", 9),
    (BASE + "modes = 4\n", "duplicate-key", 9),
    (v(model="maxwell"), "invalid-choice", 1),
    (v(integrator__method="yosida_rk4"), "missing-key", 0),
    (v(integrator__dt="-1e-3"), "range-violation", 5),
    (v(integrator__dt="2.0"), "range-violation", 5),
    (v(init__u0="single_mode 9 1.0"), "range-violation", 7),
    (v(init__u0="profile __import__('os')"), "type-mismatch", 7),
    (v(init__u1="mode_sum 1=2"), "type-mismatch", 8),
    (v(domain__length="nan"), "range-violation", 2),
    (v(model="bt_prototype", integrator__method="implicit_euler_resolvent"), "invalid-choice", 4),
    (v(sample_stride="1.5"), "type-mismatch", 9),
    (v(integrator__alpha="0"), "range-violation", 9),
    ("= 3\n" + BASE, "syntax", 1),
]
