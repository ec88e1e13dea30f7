//! Text parsers and writers for the two benchmark formats: CVRPLIB
//! (TSPLIB-like, used by the X and B sets) and Solomon / Gehring-Homberger
//! (used by the time-window sets).

use crate::error::{Error, Result};
use crate::instance::{Instance, InstanceKind, Node, TimeWindow};
use std::collections::HashMap;

/// Parses a CVRPLIB-format CVRP instance.
///
/// Recognized sections: `NAME`, `DIMENSION`, `CAPACITY`, `EDGE_WEIGHT_TYPE`
/// (must be `EUC_2D` when present), `NODE_COORD_SECTION`, `DEMAND_SECTION`,
/// `DEPOT_SECTION`. The depot is relocated to index 0 if the file lists it
/// elsewhere.
pub fn parse_cvrplib(text: &str) -> Result<Instance> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();

    let mut name = String::from("unnamed");
    let mut dimension: Option<usize> = None;
    let mut capacity: Option<u32> = None;
    let mut coords: HashMap<usize, (f64, f64)> = HashMap::new();
    let mut demands: HashMap<usize, u32> = HashMap::new();
    let mut depot_id: Option<usize> = None;

    let mut idx = 0;
    while idx < lines.len() {
        let (lineno, line) = lines[idx];
        if let Some((key, value)) = split_header(line) {
            match key.as_str() {
                "NAME" => name = value.to_string(),
                "DIMENSION" => {
                    dimension = Some(value.parse().map_err(|_| {
                        Error::parse(lineno, format!("bad DIMENSION value '{value}'"))
                    })?)
                }
                "CAPACITY" => {
                    capacity = Some(value.parse().map_err(|_| {
                        Error::parse(lineno, format!("bad CAPACITY value '{value}'"))
                    })?)
                }
                "EDGE_WEIGHT_TYPE" => {
                    if value != "EUC_2D" {
                        return Err(Error::parse(
                            lineno,
                            format!("unsupported EDGE_WEIGHT_TYPE '{value}'"),
                        ));
                    }
                }
                _ => {} // COMMENT, TYPE, ... ignored
            }
            idx += 1;
            continue;
        }
        match line {
            "NODE_COORD_SECTION" => {
                let dim = dimension
                    .ok_or_else(|| Error::parse(lineno, "NODE_COORD_SECTION before DIMENSION"))?;
                idx += 1;
                for _ in 0..dim {
                    let (ln, row) = *lines.get(idx).ok_or_else(|| {
                        Error::parse(lineno, "truncated NODE_COORD_SECTION")
                    })?;
                    let fields: Vec<&str> = row.split_whitespace().collect();
                    if fields.len() != 3 {
                        return Err(Error::parse(ln, format!("expected 'id x y', got '{row}'")));
                    }
                    let id: usize = fields[0]
                        .parse()
                        .map_err(|_| Error::parse(ln, format!("bad node id '{}'", fields[0])))?;
                    let x: f64 = fields[1]
                        .parse()
                        .map_err(|_| Error::parse(ln, format!("bad x coordinate '{}'", fields[1])))?;
                    let y: f64 = fields[2]
                        .parse()
                        .map_err(|_| Error::parse(ln, format!("bad y coordinate '{}'", fields[2])))?;
                    if coords.insert(id, (x, y)).is_some() {
                        return Err(Error::parse(ln, format!("duplicate node id {id}")));
                    }
                    idx += 1;
                }
            }
            "DEMAND_SECTION" => {
                let dim = dimension
                    .ok_or_else(|| Error::parse(lineno, "DEMAND_SECTION before DIMENSION"))?;
                idx += 1;
                for _ in 0..dim {
                    let (ln, row) = *lines
                        .get(idx)
                        .ok_or_else(|| Error::parse(lineno, "truncated DEMAND_SECTION"))?;
                    let fields: Vec<&str> = row.split_whitespace().collect();
                    if fields.len() != 2 {
                        return Err(Error::parse(ln, format!("expected 'id demand', got '{row}'")));
                    }
                    let id: usize = fields[0]
                        .parse()
                        .map_err(|_| Error::parse(ln, format!("bad node id '{}'", fields[0])))?;
                    let d: u32 = fields[1]
                        .parse()
                        .map_err(|_| Error::parse(ln, format!("bad demand '{}'", fields[1])))?;
                    if demands.insert(id, d).is_some() {
                        return Err(Error::parse(ln, format!("duplicate demand for node {id}")));
                    }
                    idx += 1;
                }
            }
            "DEPOT_SECTION" => {
                idx += 1;
                while idx < lines.len() {
                    let (ln, row) = lines[idx];
                    let v: i64 = row
                        .parse()
                        .map_err(|_| Error::parse(ln, format!("bad depot id '{row}'")))?;
                    if v == -1 {
                        idx += 1;
                        break;
                    }
                    if depot_id.replace(v as usize).is_some() {
                        return Err(Error::parse(ln, "multiple depots are not supported"));
                    }
                    idx += 1;
                }
            }
            "EOF" => break,
            other => {
                return Err(Error::parse(lineno, format!("unexpected line '{other}'")));
            }
        }
    }

    let dimension =
        dimension.ok_or_else(|| Error::parse(0, "missing DIMENSION header"))?;
    let capacity = capacity.ok_or_else(|| Error::parse(0, "missing CAPACITY header"))?;
    if coords.len() != dimension {
        return Err(Error::parse(
            0,
            format!("expected {dimension} coordinates, found {}", coords.len()),
        ));
    }
    if demands.len() != dimension {
        return Err(Error::parse(
            0,
            format!("expected {dimension} demands, found {}", demands.len()),
        ));
    }
    let depot_id = depot_id.ok_or_else(|| Error::parse(0, "missing DEPOT_SECTION"))?;

    // File ids may start at 1 (TSPLIB) or 0; normalize with the depot first.
    let mut ids: Vec<usize> = coords.keys().copied().collect();
    ids.sort_unstable();
    if !ids.contains(&depot_id) {
        return Err(Error::parse(0, format!("depot id {depot_id} has no coordinates")));
    }
    let mut order = vec![depot_id];
    order.extend(ids.iter().copied().filter(|&id| id != depot_id));

    let nodes: Vec<Node> = order
        .iter()
        .enumerate()
        .map(|(new_id, &file_id)| {
            let (x, y) = coords[&file_id];
            let demand = *demands
                .get(&file_id)
                .ok_or_else(|| Error::parse(0, format!("node {file_id} has no demand")))?;
            Ok(Node { id: new_id, x, y, demand, tw: None })
        })
        .collect::<Result<_>>()?;

    Instance::new(name, InstanceKind::Cvrp, capacity, nodes)
}

/// Writes an instance back to CVRPLIB text (1-based node ids, depot first).
pub fn render_cvrplib(inst: &Instance) -> String {
    let mut out = String::new();
    out.push_str(&format!("NAME : {}\n", inst.name));
    out.push_str("TYPE : CVRP\n");
    out.push_str(&format!("DIMENSION : {}\n", inst.len()));
    out.push_str("EDGE_WEIGHT_TYPE : EUC_2D\n");
    out.push_str(&format!("CAPACITY : {}\n", inst.capacity));
    out.push_str("NODE_COORD_SECTION\n");
    for node in &inst.nodes {
        out.push_str(&format!("{} {} {}\n", node.id + 1, node.x, node.y));
    }
    out.push_str("DEMAND_SECTION\n");
    for node in &inst.nodes {
        out.push_str(&format!("{} {}\n", node.id + 1, node.demand));
    }
    out.push_str("DEPOT_SECTION\n1\n-1\nEOF\n");
    out
}

/// Parses a Solomon / Gehring-Homberger CVRPTW instance: a name line, a
/// `VEHICLE` block with the capacity, and a `CUSTOMER` block with one row
/// per node (`id x y demand ready due service`), row 0 being the depot.
pub fn parse_solomon(text: &str) -> Result<Instance> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if lines.is_empty() {
        return Err(Error::parse(0, "empty file"));
    }
    let name = lines[0].1.to_string();

    let vehicle_at = lines
        .iter()
        .position(|(_, l)| l.eq_ignore_ascii_case("VEHICLE"))
        .ok_or_else(|| Error::parse(0, "missing VEHICLE section"))?;
    // VEHICLE header row, then the "count capacity" row
    let (cap_line, cap_row) = *lines
        .get(vehicle_at + 2)
        .ok_or_else(|| Error::parse(0, "truncated VEHICLE section"))?;
    let cap_fields: Vec<&str> = cap_row.split_whitespace().collect();
    if cap_fields.len() != 2 {
        return Err(Error::parse(cap_line, format!("expected 'count capacity', got '{cap_row}'")));
    }
    let capacity: u32 = cap_fields[1]
        .parse()
        .map_err(|_| Error::parse(cap_line, format!("bad capacity '{}'", cap_fields[1])))?;

    let customer_at = lines
        .iter()
        .position(|(_, l)| l.eq_ignore_ascii_case("CUSTOMER"))
        .ok_or_else(|| Error::parse(0, "missing CUSTOMER section"))?;

    let mut nodes = Vec::new();
    for &(lineno, row) in &lines[customer_at + 1..] {
        let fields: Vec<&str> = row.split_whitespace().collect();
        if nodes.is_empty() && fields.iter().any(|f| f.chars().any(|c| c.is_alphabetic())) {
            continue; // column header row
        }
        if fields.len() != 7 {
            return Err(Error::parse(
                lineno,
                format!("expected 7 fields 'id x y demand ready due service', got '{row}'"),
            ));
        }
        let num = |k: usize, what: &str| -> Result<f64> {
            fields[k]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad {what} '{}'", fields[k])))
        };
        let id = num(0, "id")? as usize;
        if id != nodes.len() {
            return Err(Error::parse(
                lineno,
                format!("expected customer id {}, found {id}", nodes.len()),
            ));
        }
        let (x, y) = (num(1, "x")?, num(2, "y")?);
        let demand = num(3, "demand")? as u32;
        let (ready, due, service) = (num(4, "ready")?, num(5, "due")?, num(6, "service")?);
        if ready > due {
            return Err(Error::parse(
                lineno,
                format!("ready time {ready} is after due time {due}"),
            ));
        }
        nodes.push(Node {
            id,
            x,
            y,
            demand,
            tw: Some(TimeWindow { open: ready, close: due, service }),
        });
    }
    if nodes.len() < 2 {
        return Err(Error::parse(0, "no customer rows"));
    }
    Instance::new(name, InstanceKind::Cvrptw, capacity, nodes)
}

/// Writes a CVRPTW instance back to Solomon text.
pub fn render_solomon(inst: &Instance) -> String {
    let vehicles = (inst.total_demand() + inst.capacity as u64 - 1) / inst.capacity.max(1) as u64;
    let mut out = String::new();
    out.push_str(&format!("{}\n\nVEHICLE\nNUMBER     CAPACITY\n", inst.name));
    out.push_str(&format!("  {}         {}\n\n", vehicles.max(1), inst.capacity));
    out.push_str("CUSTOMER\nCUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE TIME\n\n");
    for node in &inst.nodes {
        let tw = node.tw.unwrap_or(TimeWindow { open: 0.0, close: 0.0, service: 0.0 });
        out.push_str(&format!(
            "{} {} {} {} {} {} {}\n",
            node.id, node.x, node.y, node.demand, tw.open, tw.close, tw.service
        ));
    }
    out
}

fn split_header(line: &str) -> Option<(String, String)> {
    let (key, value) = line.split_once(':')?;
    let key = key.trim().to_uppercase();
    // Section names contain no colon; header keys are single words.
    if key.contains(' ') {
        return None;
    }
    Some((key, value.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
NAME : tiny
TYPE : CVRP
DIMENSION : 2
EDGE_WEIGHT_TYPE : EUC_2D
CAPACITY : 10
NODE_COORD_SECTION
1 0 0
2 3 4
DEMAND_SECTION
1 0
2 7
DEPOT_SECTION
1
-1
EOF
";

    #[test]
    fn parses_minimal_cvrplib() {
        let inst = parse_cvrplib(MINIMAL).unwrap();
        assert_eq!(inst.name, "tiny");
        assert_eq!(inst.len(), 2);
        assert_eq!(inst.capacity, 10);
        assert_eq!(inst.nodes[1].demand, 7);
        assert_eq!(inst.kind, InstanceKind::Cvrp);
    }

    #[test]
    fn demand_above_capacity_is_rejected() {
        let text = MINIMAL.replace("2 7", "2 11");
        assert!(parse_cvrplib(&text).is_err());
    }

    #[test]
    fn missing_capacity_is_rejected() {
        let text = MINIMAL.replace("CAPACITY : 10\n", "");
        let err = parse_cvrplib(&text).unwrap_err().to_string();
        assert!(err.contains("CAPACITY"), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = MINIMAL.replace("2 3 4", "2 3");
        let err = parse_cvrplib(&text).unwrap_err().to_string();
        assert!(err.contains("line 8"), "{err}");
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let text = MINIMAL.replace("2 3 4", "1 3 4");
        let err = parse_cvrplib(&text).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
    }

    #[test]
    fn depot_moved_to_front() {
        let text = "\
NAME : shifted
DIMENSION : 3
CAPACPLACEHOLDER
NODE_COORD_SECTION
1 5 5
2 0 0
3 9 9
DEMAND_SECTION
1 4
2 0
3 6
DEPOT_SECTION
2
-1
EOF
"
        .replace("CAPACPLACEHOLDER", "CAPACITY : 10");
        let inst = parse_cvrplib(&text).unwrap();
        assert_eq!(inst.nodes[0].demand, 0);
        assert_eq!((inst.nodes[0].x, inst.nodes[0].y), (0.0, 0.0));
        assert_eq!(inst.num_customers(), 2);
    }

    #[test]
    fn cvrplib_round_trip() {
        let inst = parse_cvrplib(MINIMAL).unwrap();
        let again = parse_cvrplib(&render_cvrplib(&inst)).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn parses_x_n101_k25_when_available() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/X-n101-k25.vrp");
        let Ok(text) = std::fs::read_to_string(path) else {
            eprintln!("skipping: benchmark file not present at {path}");
            return;
        };
        let inst = parse_cvrplib(&text).unwrap();
        assert_eq!(inst.len(), 101);
        assert_eq!(inst.capacity, 206);
    }

    fn solomon_fixture(rows: usize) -> String {
        let mut text = String::from(
            "SYNTH1\n\nVEHICLE\nNUMBER     CAPACITY\n  25         200\n\n\
CUSTOMER\nCUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE TIME\n\n\
    0      40         50          0          0       1236          0\n",
        );
        for i in 1..=rows {
            text.push_str(&format!(
                "    {i}      {}         {}         10        {}        {}         90\n",
                40 + (i % 7),
                50 + (i % 11),
                10 * (i % 5),
                600 + 10 * (i % 50),
            ));
        }
        text
    }

    #[test]
    fn parses_solomon_fixture() {
        let inst = parse_solomon(&solomon_fixture(3)).unwrap();
        assert_eq!(inst.kind, InstanceKind::Cvrptw);
        assert_eq!(inst.num_customers(), 3);
        assert_eq!(inst.capacity, 200);
        let tw = inst.nodes[1].tw.unwrap();
        assert_eq!(tw.service, 90.0);
    }

    #[test]
    fn parses_gehring_homberger_scale() {
        // the 800-customer series of the time-window benchmark
        let inst = parse_solomon(&solomon_fixture(800)).unwrap();
        assert_eq!(inst.num_customers(), 800);
    }

    #[test]
    fn header_only_solomon_is_rejected() {
        let text = "EMPTY\n\nVEHICLE\nNUMBER     CAPACITY\n  25         200\n\nCUSTOMER\nCUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE TIME\n\n";
        assert!(parse_solomon(text).is_err());
    }

    #[test]
    fn ready_after_due_is_rejected() {
        let mut text = solomon_fixture(2);
        text.push_str("    3      44         52         10        900        100         90\n");
        let err = parse_solomon(&text).unwrap_err().to_string();
        assert!(err.contains("after due"), "{err}");
    }

    #[test]
    fn solomon_round_trip() {
        let inst = parse_solomon(&solomon_fixture(5)).unwrap();
        let again = parse_solomon(&render_solomon(&inst)).unwrap();
        assert_eq!(inst, again);
    }
}
