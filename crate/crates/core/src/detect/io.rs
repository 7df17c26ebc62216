use std::io::{Read, Write};

use super::{BBox, DetectionGeo, DetectionPx, GeoDetections, GeoRef};
use crate::{Error, Result};

pub const PX_HEADER: [&str; 8] = ["patch_id", "offset_x", "offset_y", "x_min", "y_min", "x_max", "y_max", "score"];
pub const GEO_HEADER: [&str; 4] = ["lon_deg", "lat_deg", "diameter_km", "score"];

/// Comment line carrying the georef JSON in geographic CSVs.
pub const GEOREF_COMMENT_PREFIX: &str = "# georef: ";

fn reader(text: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text)
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, want: &[&str]) -> Result<()> {
    let got = rdr.headers()?;
    if got.iter().ne(want.iter().copied()) {
        return Err(Error::format(format!(
            "expected header {}, got {}",
            want.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, name: &str) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line());
    rec.get(k)
        .ok_or_else(|| Error::format(format!("line {line}: missing column {name}")))?
        .parse()
        .map_err(|_| Error::format(format!("line {line}: cannot parse {name} from {:?}", &rec[k])))
}

fn row_error(rec: &csv::StringRecord, e: Error) -> Error {
    let line = rec.position().map_or(0, |p| p.line());
    match e {
        Error::Format(m) => Error::Format(m),
        other => Error::format(format!("line {line}: {other}")),
    }
}

pub fn read_px_csv<R: Read>(mut input: R) -> Result<Vec<DetectionPx>> {
    let mut text = Vec::new();
    input.read_to_end(&mut text)?;
    let mut rdr = reader(&text);
    check_header(&mut rdr, &PX_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = || -> Result<DetectionPx> {
            let d = DetectionPx {
                patch_id: field(&rec, 0, "patch_id")?,
                offset_x: field(&rec, 1, "offset_x")?,
                offset_y: field(&rec, 2, "offset_y")?,
                bbox: BBox {
                    x_min: field(&rec, 3, "x_min")?,
                    y_min: field(&rec, 4, "y_min")?,
                    x_max: field(&rec, 5, "x_max")?,
                    y_max: field(&rec, 6, "y_max")?,
                },
                score: field(&rec, 7, "score")?,
            };
            d.validate()?;
            Ok(d)
        };
        out.push(parse().map_err(|e| row_error(&rec, e))?);
    }
    Ok(out)
}

fn write_comments<W: Write>(out: &mut W, comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    Ok(())
}

pub fn write_px_csv<W: Write>(mut out: W, dets: &[DetectionPx], comments: &[String]) -> Result<()> {
    write_comments(&mut out, comments)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PX_HEADER)?;
    for d in dets {
        w.write_record([
            d.patch_id.to_string(),
            d.offset_x.to_string(),
            d.offset_y.to_string(),
            d.bbox.x_min.to_string(),
            d.bbox.y_min.to_string(),
            d.bbox.x_max.to_string(),
            d.bbox.y_max.to_string(),
            d.score.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads geographic detections and the georef comment, if present.
pub fn read_geo_csv<R: Read>(mut input: R) -> Result<(Option<GeoRef>, Vec<DetectionGeo>)> {
    let mut text = Vec::new();
    input.read_to_end(&mut text)?;
    let mut georef = None;
    for line in String::from_utf8_lossy(&text).lines() {
        if let Some(json) = line.strip_prefix(GEOREF_COMMENT_PREFIX) {
            let g: GeoRef = serde_json::from_str(json)?;
            g.validate().map_err(|e| Error::format(format!("georef comment: {e}")))?;
            georef = Some(g);
            break;
        }
    }
    let mut rdr = reader(&text);
    check_header(&mut rdr, &GEO_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = || -> Result<DetectionGeo> {
            let d = DetectionGeo {
                lon: field(&rec, 0, "lon_deg")?,
                lat: field(&rec, 1, "lat_deg")?,
                diameter_km: field(&rec, 2, "diameter_km")?,
                score: field(&rec, 3, "score")?,
            };
            d.validate()?;
            Ok(d)
        };
        out.push(parse().map_err(|e| row_error(&rec, e))?);
    }
    Ok((georef, out))
}

/// Writes the georef comment, any extra comment lines, then the rows.
pub fn write_geo_csv<W: Write>(mut out: W, set: &GeoDetections, comments: &[String]) -> Result<()> {
    writeln!(out, "{GEOREF_COMMENT_PREFIX}{}", serde_json::to_string(&set.georef)?)?;
    write_comments(&mut out, comments)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GEO_HEADER)?;
    for d in &set.detections {
        w.write_record([
            d.lon.to_string(),
            d.lat.to_string(),
            d.diameter_km.to_string(),
            d.score.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
