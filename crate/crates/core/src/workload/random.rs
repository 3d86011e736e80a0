use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{product_name, LOCATIONS};

/// A row whose collection has exactly one axis, the variable `var` over `attr`.
#[derive(Clone)]
struct Coll {
    name: String,
    var: String,
    attr: &'static str,
    x: &'static str,
    level: usize,
}

struct Gen {
    rng: ChaCha8Rng,
    products: usize,
    rows: Vec<String>,
    colls: Vec<Coll>,
    /// Process outputs not yet consumed: (var, attr, level).
    outputs: Vec<(String, &'static str, usize)>,
    names: usize,
    vars: usize,
}

impl Gen {
    fn name(&mut self) -> String {
        self.names += 1;
        format!("f{}", self.names)
    }

    fn var(&mut self) -> String {
        self.vars += 1;
        format!("v{}", self.vars)
    }

    fn values(&mut self, attr: &str) -> Vec<String> {
        match attr {
            "product" => (0..self.products).map(product_name).collect(),
            "location" => LOCATIONS.iter().map(|s| s.to_string()).collect(),
            _ => super::CATEGORIES.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn domain(&mut self, attr: &'static str) -> String {
        let vals = self.values(attr);
        match self.rng.gen_range(0..4) {
            0 => {
                let n = self.rng.gen_range(2..=vals.len().min(6));
                let pick: Vec<String> = vals
                    .choose_multiple(&mut self.rng, n)
                    .map(|v| format!("'{v}'"))
                    .collect();
                format!("'{attr}'.{{{}}}", pick.join(", "))
            }
            1 => format!(
                "'{attr}'.(* - '{}')",
                vals.choose(&mut self.rng).expect("non-empty")
            ),
            _ => format!("'{attr}'.*"),
        }
    }

    fn limiter(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => format!("k={}", self.rng.gen_range(1..6)),
            1 => format!("p={}", [25, 50, 75][self.rng.gen_range(0..3)]),
            2 => "k=inf".into(),
            _ => format!("t{}0", if self.rng.gen_bool(0.5) { ">" } else { "<" }),
        }
    }

    fn argopt(&mut self, limiter: &str) -> &'static str {
        if limiter.starts_with('t') {
            ["argany", "argmax", "argmin"][self.rng.gen_range(0..3)]
        } else {
            ["argmax", "argmin"][self.rng.gen_range(0..2)]
        }
    }

    fn y(&mut self) -> &'static str {
        ["sales", "profit"][self.rng.gen_range(0..2)]
    }

    fn x(&mut self) -> &'static str {
        ["year", "month"][self.rng.gen_range(0..2)]
    }

    /// Extra static filter that never empties a cell of a collection over `attr`.
    fn z2(&mut self, attr: &str) -> String {
        if self.rng.gen_bool(0.6) {
            return String::new();
        }
        match attr {
            "location" => format!(
                "'product'.'{}'",
                product_name(self.rng.gen_range(0..self.products))
            ),
            _ => format!(
                "'location'.'{}'",
                LOCATIONS[self.rng.gen_range(0..LOCATIONS.len())]
            ),
        }
    }

    fn base(&mut self) {
        let attr = ["product", "location", "category"][self.rng.gen_range(0..3)];
        let (name, var, x, y) = (self.name(), self.var(), self.x(), self.y());
        let z = self.domain(attr);
        let z2 = if attr == "category" {
            String::new()
        } else {
            self.z2(attr)
        };
        self.rows
            .push(format!("{name} | '{x}' | '{y}' | {var} <-- {z} | {z2} |"));
        self.colls.push(Coll {
            name,
            var,
            attr,
            x,
            level: 0,
        });
    }

    /// Adds a process over `c`, either on its own row or on a new row sharing its variable.
    fn process(&mut self, ci: usize) {
        let c = self.colls[ci].clone();
        let out = self.var();
        let lim = self.limiter();
        let opt = self.argopt(&lim);
        match self.rng.gen_range(0..3) {
            0 => {
                let ri = self.row_of(&c.name);
                let row = &mut self.rows[ri];
                if !row.ends_with('|') {
                    return;
                }
                let _ = write!(row, " {out} <-- {opt}_{}[{lim}] T({})", c.var, c.name);
            }
            1 => {
                let (name, y) = (self.name(), self.y());
                self.rows.push(format!(
                    "{name} | '{}' | '{y}' | {} | | {out} <-- {opt}_{}[{lim}] D({}, {name})",
                    c.x, c.var, c.var, c.name
                ));
                self.colls.push(Coll {
                    name,
                    var: c.var.clone(),
                    attr: c.attr,
                    x: c.x,
                    level: c.level,
                });
            }
            _ => {
                let (name, w, y) = (self.name(), self.var(), self.y());
                let k = self.rng.gen_range(1..4);
                self.rows.push(format!(
                    "{name} | '{}' | '{y}' | {w} <-- '{}'.* | | {out} <-- argmax_{}[k={k}] sum_{w} D({}, {name})",
                    c.x, c.attr, c.var, c.name
                ));
                self.colls.push(Coll {
                    name,
                    var: w,
                    attr: c.attr,
                    x: c.x,
                    level: 0,
                });
            }
        }
        self.outputs.push((out, c.attr, c.level + 1));
    }

    fn row_of(&self, name: &str) -> usize {
        self.rows
            .iter()
            .position(|r| r.trim_start_matches('*').split(" | ").next() == Some(name))
            .expect("collection has a row")
    }

    /// Consumes a process output as the domain of a new collection.
    fn consume(&mut self) {
        let i = self.rng.gen_range(0..self.outputs.len());
        let (var, attr, level) = self.outputs.remove(i);
        let (name, x, y) = (self.name(), self.x(), self.y());
        if attr != "product" && self.rng.gen_bool(0.4) {
            let nv = self.var();
            self.rows.push(format!(
                "{name} | '{x}' | '{y}' | {nv} <-- 'product'.* | '{attr}'.[? IN {var}] |"
            ));
            self.colls.push(Coll {
                name,
                var: nv,
                attr: "product",
                x,
                level,
            });
        } else {
            let z2 = if attr == "category" {
                String::new()
            } else {
                self.z2(attr)
            };
            self.rows
                .push(format!("{name} | '{x}' | '{y}' | {var} | {z2} |"));
            self.colls.push(Coll {
                name,
                var,
                attr,
                x,
                level,
            });
        }
    }

    fn derived(&mut self) {
        let a = self
            .colls
            .choose(&mut self.rng)
            .expect("non-empty")
            .name
            .clone();
        let b = self
            .colls
            .choose(&mut self.rng)
            .expect("non-empty")
            .name
            .clone();
        let expr = match self.rng.gen_range(0..6) {
            0 => format!("{a} + {b}"),
            1 => format!("{a} - {b}"),
            2 => format!("{a} ^ {b}"),
            3 => format!("{a}[1:{}]", self.rng.gen_range(1..5)),
            4 => format!("{a}.uniq"),
            _ => format!("({a} + {b}).uniq"),
        };
        let name = self.name();
        self.rows.push(format!("*{name} <-- {expr} | | | | |"));
    }
}

/// Random query over `sales_table(products, ..)` with at most `depth` process levels.
pub fn random_query(seed: u64, products: usize, depth: usize) -> String {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        products,
        rows: Vec::new(),
        colls: Vec::new(),
        outputs: Vec::new(),
        names: 0,
        vars: 0,
    };
    for _ in 0..g.rng.gen_range(1..=2) {
        g.base();
    }
    let steps = g.rng.gen_range(1..=depth.max(1) * 2);
    for _ in 0..steps {
        if !g.outputs.is_empty() && g.rng.gen_bool(0.5) {
            g.consume();
            continue;
        }
        let open: Vec<usize> = (0..g.colls.len())
            .filter(|&i| g.colls[i].level < depth)
            .collect();
        match open.choose(&mut g.rng) {
            Some(&ci) => g.process(ci),
            None => break,
        }
    }
    while !g.outputs.is_empty() {
        g.consume();
    }
    if g.rng.gen_bool(0.5) {
        g.derived();
    }
    let n = g.rows.len();
    for i in 0..n {
        if !g.rows[i].starts_with('*') && (i + 1 == n || g.rng.gen_bool(0.3)) {
            g.rows[i].insert(0, '*');
        }
    }
    let mut q = String::from("Name | X | Y | Z | Z2 | Process\n");
    for r in &g.rows {
        q.push_str(r);
        q.push('\n');
    }
    q
}
