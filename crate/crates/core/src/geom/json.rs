//! Part JSON: `{"id", "surfaces": [{"id","kind","params"}], "cells": [{"id","region"}]}`.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Cell, Part, Sign, SignedSurface, Surface, SurfaceGeom, SurfaceKind};
use crate::scalar::Scalar;

struct Params<'a, T>(&'a SurfaceGeom<T>);

impl<T: Scalar> Serialize for Params<'_, T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let names = self.0.kind().param_names();
        let values = self.0.params();
        let mut map = s.serialize_map(Some(names.len()))?;
        for (n, v) in names.iter().zip(values) {
            map.serialize_entry(n, &v.as_f64())?;
        }
        map.end()
    }
}

#[derive(Serialize)]
#[serde(bound = "")]
struct SurfaceOut<'a, T: Scalar> {
    id: &'a str,
    kind: &'static str,
    params: Params<'a, T>,
}

#[derive(Serialize)]
struct CellOut<'a> {
    id: &'a str,
    region: Vec<(String, &'a str)>,
}

#[derive(Serialize)]
#[serde(bound = "")]
struct PartOut<'a, T: Scalar> {
    id: &'a str,
    surfaces: Vec<SurfaceOut<'a, T>>,
    cells: Vec<CellOut<'a>>,
}

impl<T: Scalar> Serialize for Part<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PartOut {
            id: &self.id,
            surfaces: self
                .surfaces
                .iter()
                .map(|sf| SurfaceOut {
                    id: &sf.id,
                    kind: sf.geom.kind().name(),
                    params: Params(&sf.geom),
                })
                .collect(),
            cells: self
                .cells
                .iter()
                .map(|c| CellOut {
                    id: &c.id,
                    region: c
                        .region
                        .iter()
                        .map(|t| (t.sign.symbol().to_string(), t.surface.as_str()))
                        .collect(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SurfaceIn {
    id: String,
    kind: String,
    params: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CellIn {
    id: String,
    region: Vec<(String, String)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartIn {
    id: String,
    surfaces: Vec<SurfaceIn>,
    cells: Vec<CellIn>,
}

/// Builds surface geometry from a kind name and named parameters.
pub(crate) fn geom_from_named<T: Scalar>(
    kind: &str,
    params: &BTreeMap<String, f64>,
) -> Result<SurfaceGeom<T>, String> {
    let kind = SurfaceKind::from_name(kind).ok_or_else(|| format!("unsupported surface kind {kind}"))?;
    let names = kind.param_names();
    if let Some(extra) = params.keys().find(|k| !names.contains(&k.as_str())) {
        return Err(format!("unexpected parameter {extra} for {kind}"));
    }
    let values = names
        .iter()
        .map(|n| {
            params
                .get(*n)
                .map(|v| T::lit(*v))
                .ok_or_else(|| format!("missing parameter {n} for {kind}"))
        })
        .collect::<Result<Vec<T>, String>>()?;
    let geom = SurfaceGeom::from_params(kind, &values).expect("parameter count matches kind");
    geom.validate()?;
    Ok(geom)
}

impl<'de, T: Scalar> Deserialize<'de> for Part<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = PartIn::deserialize(d)?;
        let surfaces = raw
            .surfaces
            .into_iter()
            .map(|s| {
                geom_from_named(&s.kind, &s.params)
                    .map(|geom| Surface { id: s.id.clone(), geom })
                    .map_err(|e| D::Error::custom(format!("surface {}: {e}", s.id)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let cells = raw
            .cells
            .into_iter()
            .map(|c| {
                let region = c
                    .region
                    .into_iter()
                    .map(|(sign, id)| {
                        let mut chars = sign.chars();
                        match (chars.next().and_then(Sign::from_symbol), chars.next()) {
                            (Some(sign), None) => Ok(SignedSurface::new(sign, id)),
                            _ => Err(D::Error::custom(format!("cell {}: bad sign {sign:?}", c.id))),
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Cell { id: c.id, region })
            })
            .collect::<Result<Vec<_>, D::Error>>()?;
        Ok(Part {
            id: raw.id,
            surfaces,
            cells,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Axis, KernelConfig};
    use super::*;

    #[test]
    fn parses_schema_example() {
        let text = r#"{"id":"p","surfaces":[
            {"id":"s1","kind":"XPlane","params":{"x0":0.0}},
            {"id":"s2","kind":"ZCylinder","params":{"x0":0.5,"y0":0.5,"r":0.25}}],
            "cells":[{"id":"c1","region":[["+","s1"],["-","s2"]]}]}"#;
        let part: Part<f64> = serde_json::from_str(text).unwrap();
        assert_eq!(
            part.surfaces[1].geom,
            SurfaceGeom::Cylinder {
                axis: Axis::Z,
                center: [0.5, 0.5],
                radius: 0.25
            }
        );
        assert_eq!(part.cells[0].region[1], SignedSurface::new(Sign::Minus, "s2"));
        let out = serde_json::to_string(&part).unwrap();
        assert!(out.contains(r#""params":{"x0":0.5,"y0":0.5,"r":0.25}"#), "{out}");
        let again: Part<f64> = serde_json::from_str(&out).unwrap();
        assert_eq!(again, part);
    }

    #[test]
    fn rejects_wrong_params() {
        let bad = r#"{"id":"p","surfaces":[{"id":"s1","kind":"XCylinder","params":{"x0":0.0,"z0":0.0,"r":1.0}}],"cells":[]}"#;
        assert!(serde_json::from_str::<Part<f64>>(bad).is_err());
        let bad = r#"{"id":"p","surfaces":[{"id":"s1","kind":"Sphere","params":{"r":1.0}}],"cells":[]}"#;
        assert!(serde_json::from_str::<Part<f64>>(bad).is_err());
        let bad = r#"{"id":"p","surfaces":[{"id":"s1","kind":"YCylinder","params":{"x0":0.0,"z0":0.0,"r":-1.0}}],"cells":[]}"#;
        assert!(serde_json::from_str::<Part<f64>>(bad).is_err());
    }

    #[test]
    fn deserialized_part_validates() {
        let text = r#"{"id":"p","surfaces":[
            {"id":"s1","kind":"ZCylinder","params":{"x0":0.0,"y0":0.0,"r":1.0}},
            {"id":"s2","kind":"ZPlane","params":{"z0":0.0}},
            {"id":"s3","kind":"ZPlane","params":{"z0":2.0}}],
            "cells":[{"id":"c1","region":[["-","s1"],["+","s2"],["-","s3"]]}]}"#;
        let part: Part<f32> = serde_json::from_str(text).unwrap();
        part.validate(&KernelConfig::default()).unwrap();
    }
}
