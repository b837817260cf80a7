use super::Formula;

// Binding strength, loosest first; must mirror the parser's levels.
const IFF: u8 = 1;
const IMPLIES: u8 = 2;
const UNTIL: u8 = 3;
const OR: u8 = 4;
const AND: u8 = 5;
const UNARY: u8 = 6;
const PRIMARY: u8 = 7;

fn level(f: &Formula) -> u8 {
    match f {
        Formula::Iff(..) => IFF,
        Formula::Implies(..) => IMPLIES,
        Formula::Until(..) | Formula::WeakUntil(..) => UNTIL,
        Formula::Or(..) => OR,
        Formula::And(..) => AND,
        Formula::Not(_) | Formula::Next(_) | Formula::Globally(_) | Formula::Finally(_) => UNARY,
        Formula::Atom(_) | Formula::Cmp { .. } => PRIMARY,
    }
}

/// Canonical text with the minimum parentheses needed for
/// `parse_formula(render_formula(f)) == f`.
pub fn render_formula(f: &Formula) -> String {
    let mut out = String::new();
    write(f, 0, &mut out);
    out
}

fn write(f: &Formula, min_level: u8, out: &mut String) {
    let paren = level(f) < min_level;
    if paren {
        out.push('(');
    }
    match f {
        Formula::Atom(p) => out.push_str(p.as_str()),
        Formula::Cmp { var, op, value } => {
            out.push_str(&format!("{var} {} {value}", op.symbol()));
        }
        Formula::Not(g) => {
            out.push('!');
            write(g, UNARY, out);
        }
        Formula::Next(g) => prefix("X ", g, out),
        Formula::Globally(g) => prefix("G ", g, out),
        Formula::Finally(g) => prefix("F ", g, out),
        Formula::Iff(a, b) => infix(a, " <-> ", b, IFF, IMPLIES, out),
        Formula::Implies(a, b) => infix(a, " -> ", b, UNTIL, IMPLIES, out),
        Formula::Until(a, b) => infix(a, " U ", b, OR, UNTIL, out),
        Formula::WeakUntil(a, b) => infix(a, " W ", b, OR, UNTIL, out),
        Formula::Or(a, b) => infix(a, " | ", b, OR, AND, out),
        Formula::And(a, b) => infix(a, " & ", b, AND, UNARY, out),
    }
    if paren {
        out.push(')');
    }
}

fn prefix(op: &str, operand: &Formula, out: &mut String) {
    out.push_str(op);
    write(operand, UNARY, out);
}

fn infix(a: &Formula, op: &str, b: &Formula, left: u8, right: u8, out: &mut String) {
    write(a, left, out);
    out.push_str(op);
    write(b, right, out);
}
