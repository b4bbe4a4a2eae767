//! C emission: one translation unit per SWA with a reaction function over a
//! state enum, plus a stand-alone driver that replays a stimulus CSV and
//! prints the trace format of [`crate::swa`].

use std::fmt::Write as _;

use crate::expr::CmpOp;
use crate::odesolve::Law;
use crate::swa::{AffineF64, Cond, Swa, SwaTransition, Update};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodegenOptions {
    /// Annotate egress branches with the source transitions.
    pub comments: bool,
}

impl Default for CodegenOptions {
    fn default() -> Self {
        CodegenOptions { comments: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedUnit {
    pub source_text: String,
    /// Name of the reaction function.
    pub entry_symbol: String,
    /// Enumerators in state order, followed by the `S___none` sentinel.
    pub state_enum: Vec<String>,
}

pub fn entry_symbol(swa: &Swa) -> String {
    format!("{}R", swa.name)
}

fn state_ident(name: &str) -> String {
    format!("S__{name}")
}

const NONE_STATE: &str = "S___none";

/// `{:?}` of an f64 is a valid C double literal (`150.0`, `1e-5`, `-0.075`).
fn lit(x: f64) -> String {
    format!("{x:?}")
}

fn c_string(s: &str) -> String {
    let mut out = String::from("\"");
    for b in s.bytes() {
        match b {
            b'"' => out.push_str("\\\""),
            b'\\' => out.push_str("\\\\"),
            b'\n' => out.push_str("\\n"),
            0x20..=0x7e => out.push(b as char),
            _ => {
                let _ = write!(out, "\\{b:03o}");
            }
        }
    }
    out.push('"');
    out
}

fn op_code(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Lt => "HASC_LT",
        CmpOp::Le => "HASC_LE",
        CmpOp::Gt => "HASC_GT",
        CmpOp::Ge => "HASC_GE",
        CmpOp::Eq => "HASC_EQ",
    }
}

fn cond(swa: &Swa, prefix: &str, c: &Cond) -> String {
    format!("{prefix}{} {} {}", swa.vars[c.var], c.op, lit(c.bound))
}

fn conj(parts: Vec<String>) -> String {
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join(" && ")
    }
}

/// Left to right, mirroring [`AffineF64::eval`].
fn affine(swa: &Swa, e: &AffineF64) -> String {
    if e.terms.is_empty() {
        return lit(e.constant);
    }
    let mut parts: Vec<String> = e
        .terms
        .iter()
        .map(|&(v, c)| if c == 1.0 { format!("s__{}", swa.vars[v]) } else { format!("{}*s__{}", lit(c), swa.vars[v]) })
        .collect();
    if e.constant != 0.0 {
        parts.push(lit(e.constant));
    }
    parts.join(" + ")
}

fn ode_body(law: Law) -> String {
    match law {
        Law::Constant => "C1".into(),
        Law::Linear { slope } => format!("C1 + {}*d*k", lit(slope)),
        Law::Exponential { rate, equilibrium } if equilibrium == 0.0 => format!("C1*exp({}*d*k)", lit(rate)),
        Law::Exponential { rate, equilibrium } => format!("{} + C1*exp({}*d*k)", lit(equilibrium), lit(rate)),
    }
}

fn init_body(law: Law) -> String {
    match law {
        Law::Exponential { equilibrium, .. } if equilibrium != 0.0 => format!("x - {}", lit(equilibrium)),
        _ => "x".into(),
    }
}

fn ode_call(state: &str, n: usize, law: Law, var: &str) -> String {
    match law {
        Law::Constant => format!("{state}_ode_{n}(C1__{var})"),
        _ => format!("{state}_ode_{n}(d, (double)(k + 1), C1__{var})"),
    }
}

fn events_test(swa: &Swa, present: u128, absent: u128) -> Vec<String> {
    let mut out: Vec<String> = swa.events.names_in(present).into_iter().map(|e| format!("e__{e}")).collect();
    out.extend(swa.events.names_in(absent).into_iter().map(|e| format!("!e__{e}")));
    out
}

fn describe(swa: &Swa, t: &SwaTransition, src: &str) -> String {
    let mut s = format!("{src} -> {}", swa.states[t.dst].name);
    let ev = swa.events.names_in(t.present);
    if !ev.is_empty() {
        let _ = write!(s, " on {}", ev.join(" & "));
    }
    s
}

fn emit_egress(out: &mut String, swa: &Swa, t: &SwaTransition, src: &str, opts: &CodegenOptions) {
    let mut tests = events_test(swa, t.present, t.absent);
    tests.extend(t.hold.iter().map(|c| cond(swa, "v__", c)));
    tests.extend(t.next.iter().map(|c| cond(swa, "n__", c)));
    if !t.jump.is_empty() {
        let resets: Vec<String> = swa.vars.iter().map(|v| format!("s__{v} = v__{v}")).collect();
        tests.push(format!("({}, 1)", resets.join(", ")));
        for c in &t.jump {
            let v = &swa.vars[c.var];
            tests.push(format!("hasc_sat(&s__{v}, v__{v}, n__{v}, {}, {})", op_code(c.op), lit(c.bound)));
        }
        tests.extend(t.jump.iter().map(|c| cond(swa, "s__", c)));
    }
    let _ = writeln!(out, "        }} else if ({}) {{", conj(tests));
    if opts.comments {
        let _ = writeln!(out, "            /* {} */", describe(swa, t, src));
    }
    if t.jump.is_empty() {
        for v in &swa.vars {
            let _ = writeln!(out, "            s__{v} = v__{v};");
        }
    }
    let dst = &swa.states[t.dst];
    for u in &t.updates {
        match u {
            Update::Assign { var, expr } => {
                let _ = writeln!(out, "            v__{} = {};", swa.vars[*var], affine(swa, expr));
            }
            Update::Capture { var } => {
                let v = &swa.vars[*var];
                let _ = writeln!(out, "            v__{v} = s__{v};");
            }
            Update::ResolveC1 { var } => {
                let v = &swa.vars[*var];
                let _ = writeln!(out, "            C1__{v} = {}_init_{}(v__{v});", dst.name, var + 1);
            }
            Update::ResetK => out.push_str("            k = 0;\n"),
            Update::Emit { event } => {
                let _ = writeln!(out, "            o__{} = 1;", swa.events.names()[*event]);
            }
        }
    }
    let _ = writeln!(out, "            return {};", state_ident(&dst.name));
}

const PRELUDE: &str = r#"#define HASC_LT 0
#define HASC_LE 1
#define HASC_GT 2
#define HASC_GE 3
#define HASC_EQ 4

static int hasc_holds(double a, int op, double b) {
    switch (op) {
    case HASC_LT: return a < b;
    case HASC_LE: return a <= b;
    case HASC_GT: return a > b;
    case HASC_GE: return a >= b;
    default: return a == b;
    }
}

/* Clamps *s to b when b lies between the current and next values. */
static int hasc_sat(double *s, double v, double n, int op, double b) {
    double lo = v < n ? v : n;
    double hi = v < n ? n : v;
    if (hasc_holds(*s, op, b)) return 1;
    if (op == HASC_LT || op == HASC_GT) return 0;
    if (lo <= b && b <= hi) {
        *s = b;
        return 1;
    }
    return 0;
}
"#;

pub fn emit_c(swa: &Swa, opts: &CodegenOptions) -> EmittedUnit {
    let entry = entry_symbol(swa);
    let mut out = String::new();
    let _ = writeln!(out, "/* Reaction function for `{}`. */", swa.name);
    out.push_str("#include <math.h>\n#include <stdio.h>\n#include <stdlib.h>\n\n");

    let mut state_enum: Vec<String> = swa.states.iter().map(|s| state_ident(&s.name)).collect();
    state_enum.push(NONE_STATE.to_string());
    let _ = writeln!(out, "enum states {{ {} }};\n", state_enum.join(", "));

    let _ = writeln!(out, "static const double d = {};", lit(swa.delta));
    out.push_str("static long long k = 0;\n");
    for (v, init) in swa.vars.iter().zip(&swa.init) {
        let _ = writeln!(out, "double v__{v} = {};", lit(*init));
        let _ = writeln!(out, "static double C1__{v}, s__{v}, n__{v};");
    }
    for e in swa.events.names_in(swa.inputs) {
        let _ = writeln!(out, "int e__{e} = 0;");
    }
    for e in swa.events.names_in(swa.outputs) {
        let _ = writeln!(out, "int o__{e} = 0;");
    }
    out.push('\n');
    out.push_str(PRELUDE);
    out.push_str(
        "\nstatic void hasc_unreachable(const char *state) {\n    \
         fflush(stdout);\n    \
         fprintf(stderr, \"unreachable state: no transition enabled in %s (k = %lld)\\n\", state, k);\n    \
         exit(3);\n}\n",
    );

    for s in &swa.states {
        for (n, law) in s.self_transition.witnesses.iter().enumerate() {
            let n = n + 1;
            match law {
                Law::Constant => {
                    let _ = writeln!(out, "\ndouble {}_ode_{n}(double C1) {{\n    return C1;\n}}", s.name);
                }
                _ => {
                    let _ = writeln!(
                        out,
                        "\ndouble {}_ode_{n}(double d, double k, double C1) {{\n    return {};\n}}",
                        s.name,
                        ode_body(*law)
                    );
                }
            }
            let _ = writeln!(out, "\ndouble {}_init_{n}(double x) {{\n    return {};\n}}", s.name, init_body(*law));
        }
    }

    let _ = writeln!(out, "\nenum states {entry}(enum states cstate, enum states pstate) {{\n    switch (cstate) {{");
    for s in &swa.states {
        let st = &s.self_transition;
        let _ = writeln!(out, "    case {}:", state_ident(&s.name));
        let refresh: Vec<String> =
            swa.vars.iter().enumerate().map(|(j, v)| format!("C1__{v} = {}_init_{}(v__{v});", s.name, j + 1)).collect();
        if !refresh.is_empty() {
            let _ = writeln!(out, "        if (pstate != cstate) {{ {} }}", refresh.join(" "));
        }
        for (j, (v, law)) in swa.vars.iter().zip(&st.witnesses).enumerate() {
            let _ = writeln!(out, "        n__{v} = {};", ode_call(&s.name, j + 1, *law, v));
        }
        let mut intra: Vec<String> = st.invariant.iter().map(|c| cond(swa, "v__", c)).collect();
        intra.extend(st.invariant.iter().map(|c| cond(swa, "n__", c)));
        intra.extend(events_test(swa, 0, st.absent));
        let _ = writeln!(out, "        if ({}) {{", conj(intra));
        for v in &swa.vars {
            let _ = writeln!(out, "            v__{v} = n__{v};");
        }
        let _ = writeln!(out, "            k = k + 1;\n            return {};", state_ident(&s.name));
        for t in &s.egress {
            emit_egress(&mut out, swa, t, &s.name, opts);
        }
        let _ = writeln!(out, "        }}\n        hasc_unreachable({});\n        return {NONE_STATE};", c_string(&s.name));
    }
    let _ = writeln!(out, "    default:\n        return {NONE_STATE};\n    }}\n}}");
    EmittedUnit { source_text: out, entry_symbol: entry, state_enum }
}

const DRIVER_BODY: &str = r#"
typedef struct {
    unsigned long long tick;
    int event;
} stim_entry;

static stim_entry *stim = 0;
static size_t nstim = 0, capstim = 0;

static int by_tick(const void *a, const void *b) {
    unsigned long long x = ((const stim_entry *)a)->tick, y = ((const stim_entry *)b)->tick;
    return x < y ? -1 : x > y;
}

static char *trim(char *s) {
    char *e;
    while (*s == ' ' || *s == '\t') s++;
    e = s + strlen(s);
    while (e > s && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r' || e[-1] == '\n')) *--e = 0;
    return s;
}

static int is_tick_header(const char *s) {
    const char *t = "tick";
    while (*t) {
        if (tolower((unsigned char)*s) != *t) return 0;
        s++;
        t++;
    }
    return *s == 0;
}

static void push_entry(unsigned long long tick, int event) {
    if (nstim == capstim) {
        capstim = capstim ? 2 * capstim : 64;
        stim = realloc(stim, capstim * sizeof *stim);
        if (!stim) exit(2);
    }
    stim[nstim].tick = tick;
    stim[nstim].event = event;
    nstim++;
}

static void load_stimulus(const char *path) {
    FILE *f;
    char line[4096];
    int first = 1;
    unsigned long lineno = 0;
    if (!path || !*path) return;
    f = fopen(path, "r");
    if (!f) {
        fprintf(stderr, "cannot open stimulus file %s\n", path);
        exit(2);
    }
    while (fgets(line, sizeof line, f)) {
        char *p, *comma, *ev, *end;
        unsigned long long tick;
        lineno++;
        p = strchr(line, '#');
        if (p) *p = 0;
        p = trim(line);
        if (!*p) continue;
        comma = strchr(p, ',');
        ev = comma ? comma + 1 : p + strlen(p);
        if (comma) *comma = 0;
        p = trim(p);
        if (first) {
            first = 0;
            if (is_tick_header(p)) continue;
        }
        tick = strtoull(p, &end, 10);
        if (end == p || *end) {
            fprintf(stderr, "line %lu: `%s` is not a tick number\n", lineno, p);
            exit(2);
        }
        while (ev && *ev) {
            char *semi = strchr(ev, ';');
            char *name;
            int i, found = -1;
            if (semi) *semi = 0;
            name = trim(ev);
            if (*name) {
                for (i = 0; i < N_EXT; i++)
                    if (strcmp(ext_names[i], name) == 0) found = i;
                if (found < 0) {
                    fprintf(stderr, "line %lu: unknown input event `%s`\n", lineno, name);
                    exit(2);
                }
                push_entry(tick, found);
            }
            ev = semi ? semi + 1 : 0;
        }
    }
    fclose(f);
    if (nstim) qsort(stim, nstim, sizeof *stim, by_tick);
}

static void print_events(int *const *flags, const char *const *names, int count) {
    int i, sep = 0;
    for (i = 0; i < count; i++) {
        if (*flags[i]) {
            if (sep) putchar(';');
            fputs(names[i], stdout);
            sep = 1;
        }
    }
}

int main(int argc, char **argv) {
    const char *path = STIMULUS_PATH;
    unsigned long long ticks = TICKS, n;
    size_t cursor = 0;
    enum states cur = INITIAL_STATE, prev = S___none, next;
    double snap[N_VARS + 1];
    int pend[N_INT + 1];
    int i;
    if (argc > 1) path = argv[1];
    if (argc > 2) ticks = strtoull(argv[2], 0, 10);
    load_stimulus(path);
    for (i = 0; i < N_INT; i++) pend[i] = 0;
    fputs(TRACE_HEADER, stdout);
    for (n = 0; n < ticks; n++) {
        for (i = 0; i < N_EXT; i++) *ext_flags[i] = 0;
        while (cursor < nstim && stim[cursor].tick < n) cursor++;
        while (cursor < nstim && stim[cursor].tick == n) *ext_flags[stim[cursor++].event] = 1;
        for (i = 0; i < N_INT; i++) *int_in[i] = pend[i];
        for (i = 0; i < N_OUT; i++) *out_flags[i] = 0;
        for (i = 0; i < N_VARS; i++) snap[i] = *var_ptrs[i];
        next = ENTRY(cur, prev);
        printf("%llu,%.15g,%s", n, (double)n * d, state_names[cur]);
        for (i = 0; i < N_VARS; i++) printf(",%.15g", snap[i]);
        putchar(',');
        print_events(ext_flags, ext_names, N_EXT);
        putchar(',');
        print_events(out_flags, out_names, N_OUT);
        putchar('\n');
        for (i = 0; i < N_INT; i++) pend[i] = *int_out[i];
        prev = cur;
        cur = next;
    }
    free(stim);
    return 0;
}
"#;

fn ptr_array(decl: &str, items: Vec<String>) -> String {
    let mut items = items;
    items.push("0".into());
    format!("static {decl}[] = {{ {} }};\n", items.join(", "))
}

/// `main()` harness for the unit of [`emit_c`]; `argv[1]` overrides the
/// stimulus path and `argv[2]` the tick count.
pub fn emit_driver(swa: &Swa, stimulus: Option<&str>, ticks: u64) -> String {
    let entry = entry_symbol(swa);
    let ext = swa.events.names_in(swa.external_inputs());
    let outs = swa.events.names_in(swa.outputs);
    let internal = swa.events.names_in(swa.internal);
    let mut out = String::new();
    let _ = writeln!(out, "/* Trace driver for `{}`. */", swa.name);
    out.push_str("#include <ctype.h>\n#include <stdio.h>\n#include <stdlib.h>\n#include <string.h>\n\n");
    let mut states: Vec<String> = swa.states.iter().map(|s| state_ident(&s.name)).collect();
    states.push(NONE_STATE.into());
    let _ = writeln!(out, "enum states {{ {} }};", states.join(", "));
    let _ = writeln!(out, "extern enum states {entry}(enum states cstate, enum states pstate);");
    for v in &swa.vars {
        let _ = writeln!(out, "extern double v__{v};");
    }
    for e in swa.events.names_in(swa.inputs) {
        let _ = writeln!(out, "extern int e__{e};");
    }
    for e in &outs {
        let _ = writeln!(out, "extern int o__{e};");
    }
    out.push('\n');
    let _ = writeln!(out, "#define ENTRY {entry}");
    let _ = writeln!(out, "#define INITIAL_STATE {}", state_ident(&swa.states[swa.initial].name));
    let _ = writeln!(out, "#define STIMULUS_PATH {}", c_string(stimulus.unwrap_or("")));
    let _ = writeln!(out, "#define TICKS {ticks}ULL");
    let _ = writeln!(out, "#define N_VARS {}", swa.vars.len());
    let _ = writeln!(out, "#define N_EXT {}", ext.len());
    let _ = writeln!(out, "#define N_OUT {}", outs.len());
    let _ = writeln!(out, "#define N_INT {}", internal.len());
    let mut header = String::from("tick,time,location");
    for v in &swa.vars {
        header.push(',');
        header.push_str(v);
    }
    header.push_str(",inputs,outputs\n");
    let _ = writeln!(out, "#define TRACE_HEADER {}", c_string(&header));
    let _ = writeln!(out, "\nstatic const double d = {};", lit(swa.delta));
    out.push_str(&ptr_array(
        "const char *const state_names",
        swa.states.iter().map(|s| c_string(&s.name)).collect(),
    ));
    out.push_str(&ptr_array("double *const var_ptrs", swa.vars.iter().map(|v| format!("&v__{v}")).collect()));
    out.push_str(&ptr_array("const char *const ext_names", ext.iter().map(|e| c_string(e)).collect()));
    out.push_str(&ptr_array("int *const ext_flags", ext.iter().map(|e| format!("&e__{e}")).collect()));
    out.push_str(&ptr_array("const char *const out_names", outs.iter().map(|e| c_string(e)).collect()));
    out.push_str(&ptr_array("int *const out_flags", outs.iter().map(|e| format!("&o__{e}")).collect()));
    out.push_str(&ptr_array("int *const int_in", internal.iter().map(|e| format!("&e__{e}")).collect()));
    out.push_str(&ptr_array("int *const int_out", internal.iter().map(|e| format!("&o__{e}")).collect()));
    out.push_str(DRIVER_BODY);
    out
}
