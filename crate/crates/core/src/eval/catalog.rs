use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const CATALOG_HEADER: [&str; 5] = ["id", "lat_deg", "lon_deg", "diameter_km", "arc_img"];

/// Ground-truth crater.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
    pub diameter_km: f64,
    /// Fraction of the rim delineated, when known.
    pub arc_img: Option<f64>,
}

impl CatalogEntry {
    pub fn validate(&self) -> Result<()> {
        if !(self.diameter_km > 0.0 && self.diameter_km.is_finite()) {
            return Err(Error::arg(format!("diameter {} km must be positive", self.diameter_km)));
        }
        if !self.lon.is_finite() || !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::arg(format!("position ({}, {}) out of range", self.lon, self.lat)));
        }
        if let Some(a) = self.arc_img {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::arg(format!("arc_img {a} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<CatalogEntry>> {
    read_catalog(File::open(path)?)
}

/// Parses the catalog CSV; `#` lines are comments and `arc_img` may be empty.
pub fn read_catalog<R: Read>(input: R) -> Result<Vec<CatalogEntry>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(format!("catalog is missing column {name}")))
    };
    let cols = [col("id")?, col("lat_deg")?, col("lon_deg")?, col("diameter_km")?, col("arc_img")?];
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(row + 2, |p| p.line() as usize);
        let get = |k: usize| rec.get(cols[k]).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            get(k).parse::<f64>().map_err(|_| {
                Error::format(format!("catalog line {line}: cannot parse {} from {:?}", CATALOG_HEADER[k], get(k)))
            })
        };
        let entry = CatalogEntry {
            id: get(0).to_string(),
            lat: num(1)?,
            lon: num(2)?,
            diameter_km: num(3)?,
            arc_img: if get(4).is_empty() { None } else { Some(num(4)?) },
        };
        entry
            .validate()
            .map_err(|e| Error::format(format!("catalog line {line}: {e}")))?;
        out.push(entry);
    }
    Ok(out)
}

pub fn write_catalog<W: Write>(mut out: W, entries: &[CatalogEntry], comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CATALOG_HEADER)?;
    for e in entries {
        w.write_record([
            e.id.clone(),
            e.lat.to_string(),
            e.lon.to_string(),
            e.diameter_km.to_string(),
            e.arc_img.map(|a| a.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Entries with `d_min ≤ diameter ≤ d_max`.
pub fn filter_band(catalog: &[CatalogEntry], d_min: f64, d_max: f64) -> Result<Vec<CatalogEntry>> {
    if !(d_min < d_max) || d_min.is_nan() {
        return Err(Error::arg(format!("band [{d_min}, {d_max}] is empty")));
    }
    Ok(catalog
        .iter()
        .filter(|e| e.diameter_km >= d_min && e.diameter_km <= d_max)
        .cloned()
        .collect())
}

/// Kilometre range covered by a pixel-size range at a given resolution.
pub fn diameter_band_for_scale(px_min: f64, px_max: f64, meters_per_pixel: f64) -> Result<(f64, f64)> {
    if !(px_min > 0.0 && px_max > 0.0 && meters_per_pixel > 0.0) {
        return Err(Error::arg("pixel range and resolution must be positive"));
    }
    Ok((px_min * meters_per_pixel / 1000.0, px_max * meters_per_pixel / 1000.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rows_and_empty_arc() {
        let text = "# comment\nid,lat_deg,lon_deg,diameter_km,arc_img\na,1.5,-20,7,0.9\nb,2,3,5,\nc,-3,4,9.5,1\n";
        let cat = read_catalog(text.as_bytes()).unwrap();
        assert_eq!(cat.len(), 3);
        assert_eq!(cat[0].lon, -20.0);
        assert_eq!(cat[1].arc_img, None);
        let mut buf = Vec::new();
        write_catalog(&mut buf, &cat, &[]).unwrap();
        assert_eq!(read_catalog(buf.as_slice()).unwrap(), cat);
    }

    #[test]
    fn bad_rows_are_format_errors() {
        let bad_d = "id,lat_deg,lon_deg,diameter_km,arc_img\na,1,2,0,\n";
        assert!(matches!(read_catalog(bad_d.as_bytes()), Err(Error::Format(m)) if m.contains("line 2")));
        let bad_num = "id,lat_deg,lon_deg,diameter_km,arc_img\na,1,2,3,\nb,x,2,3,\n";
        assert!(matches!(read_catalog(bad_num.as_bytes()), Err(Error::Format(m)) if m.contains("line 3")));
        let missing = "id,lat_deg,lon_deg,arc_img\n";
        assert!(matches!(read_catalog(missing.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn band_is_inclusive() {
        let cat: Vec<CatalogEntry> = [3.0, 5.0, 7.5, 10.0, 12.0]
            .iter()
            .map(|&d| CatalogEntry { id: String::new(), lon: 0.0, lat: 0.0, diameter_km: d, arc_img: None })
            .collect();
        assert_eq!(filter_band(&cat, 5.0, 10.0).unwrap().len(), 3);
        assert_eq!(filter_band(&cat, 0.0, f64::INFINITY).unwrap().len(), 5);
        assert!(filter_band(&[], 5.0, 10.0).unwrap().is_empty());
        assert!(filter_band(&cat, 5.0, 5.0).is_err());
    }

    #[test]
    fn scale_bands() {
        assert_eq!(diameter_band_for_scale(12.5, 25.0, 400.0).unwrap(), (5.0, 10.0));
        assert_eq!(diameter_band_for_scale(12.5, 25.0, 200.0).unwrap(), (2.5, 5.0));
        assert_eq!(diameter_band_for_scale(12.5, 25.0, 100.0).unwrap(), (1.25, 2.5));
    }
}
