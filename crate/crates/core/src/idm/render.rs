use std::fmt;

use super::model::*;
use crate::ident::Ident;

fn list(items: &[Ident]) -> String {
    items.iter().map(|i| i.as_str()).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for IdmSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entities {
            writeln!(f, "entity {} level {} {{", e.name, e.level.keyword())?;
            for a in &e.attributes {
                write!(f, "  {} : {}", a.name, a.kind)?;
                if a.nullable {
                    f.write_str(" null")?;
                }
                match a.io_role {
                    IoRole::Input => f.write_str(" input")?,
                    IoRole::Output => f.write_str(" output")?,
                    IoRole::Stored => {}
                }
                f.write_str(";\n")?;
            }
            if !e.primary_key.is_empty() {
                writeln!(f, "  key({})", list(&e.primary_key))?;
            }
            f.write_str("}\n\n")?;
        }
        for r in &self.relationships {
            write!(f, "relationship {}", r.name)?;
            if r.declared_as_fk {
                f.write_str(" fk")?;
            }
            if r.output {
                f.write_str(" output")?;
            }
            let (from, to): (Vec<Ident>, Vec<Ident>) = r.join_pairs.iter().cloned().unzip();
            writeln!(f, " from {}({}) to {}({})", r.from_entity, list(&from), r.to_entity, list(&to))?;
        }
        for a in &self.assignments {
            writeln!(f, "assignment {} root {}", a.name, a.root)?;
        }
        Ok(())
    }
}
