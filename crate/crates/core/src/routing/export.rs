use std::fmt::Write;

use serde_json::{json, Value};

use super::RouteError;
use crate::geodesy::{enu_to_wgs84, EnuPoint, Wgs84Point};

/// GeoJSON `Feature` with a WGS-84 `LineString` geometry.
pub fn route_to_geojson(points: &[EnuPoint], anchor: Wgs84Point) -> Result<Value, RouteError> {
    let coords = points
        .iter()
        .map(|p| enu_to_wgs84(anchor, *p).map(|w| json!([w.lon(), w.lat()])))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(json!({
        "type": "Feature",
        "properties": {},
        "geometry": { "type": "LineString", "coordinates": coords },
    }))
}

/// `x_east,y_north` rows with millimeter precision.
pub fn waypoints_to_csv(points: &[EnuPoint]) -> String {
    let mut out = String::from("x_east,y_north\n");
    for p in points {
        let _ = writeln!(out, "{:.3},{:.3}", p.x, p.y);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geojson_shape() {
        let anchor = Wgs84Point::new(31.0, 121.0).unwrap();
        let v = route_to_geojson(&[EnuPoint::ORIGIN, EnuPoint::new(10.0, 0.0)], anchor).unwrap();
        assert_eq!(v["geometry"]["type"], "LineString");
        assert_eq!(v["geometry"]["coordinates"][0][0], 121.0);
        assert_eq!(v["geometry"]["coordinates"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn csv_rows() {
        let csv = waypoints_to_csv(&[EnuPoint::new(1.0, -2.5)]);
        assert_eq!(csv, "x_east,y_north\n1.000,-2.500\n");
    }
}
