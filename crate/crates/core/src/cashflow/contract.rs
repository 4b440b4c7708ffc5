use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::SupportWindow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaseContract {
    pub id: String,
    pub monthly_payment: f64,
    pub vehicle_value: f64,
    /// Age in months at the valuation date.
    pub age: u32,
}

impl LeaseContract {
    pub fn new(
        id: impl Into<String>,
        monthly_payment: f64,
        vehicle_value: f64,
        age: u32,
    ) -> Result<Self> {
        let id = id.into();
        if !(monthly_payment.is_finite() && monthly_payment > 0.0) {
            return Err(Error::param(format!(
                "{id}: monthly payment must be positive"
            )));
        }
        if !(vehicle_value.is_finite() && vehicle_value > 0.0) {
            return Err(Error::param(format!(
                "{id}: vehicle value must be positive"
            )));
        }
        Ok(Self {
            id,
            monthly_payment,
            vehicle_value,
            age,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    contracts: Vec<LeaseContract>,
    window: SupportWindow,
}

impl Portfolio {
    pub fn new(contracts: Vec<LeaseContract>, window: SupportWindow) -> Result<Self> {
        if contracts.is_empty() {
            return Err(Error::param("portfolio has no contracts"));
        }
        if let Some(c) = contracts
            .iter()
            .find(|c| c.age < window.delta() || c.age >= window.omega())
        {
            return Err(Error::param(format!(
                "contract `{}` has age {} outside {}..{}",
                c.id,
                c.age,
                window.delta(),
                window.omega()
            )));
        }
        Ok(Self { contracts, window })
    }

    pub fn contracts(&self) -> &[LeaseContract] {
        &self.contracts
    }

    pub fn window(&self) -> &SupportWindow {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.contracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contracts.is_empty()
    }
}

/// Expected vehicle value by age, as a fraction of the original value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DepreciationCurve {
    values: BTreeMap<u32, f64>,
}

#[derive(Serialize, Deserialize)]
struct CurveRow {
    age: u32,
    z: f64,
}

impl DepreciationCurve {
    pub fn new(values: BTreeMap<u32, f64>) -> Result<Self> {
        if let Some((age, z)) = values.iter().find(|(_, z)| !(0.0..=1.0).contains(*z)) {
            return Err(Error::param(format!("Z({age}) = {z} is outside [0, 1]")));
        }
        Ok(Self { values })
    }

    pub fn from_fn(ages: std::ops::RangeInclusive<u32>, f: impl Fn(u32) -> f64) -> Result<Self> {
        Self::new(ages.map(|j| (j, f(j))).collect())
    }

    pub fn get(&self, age: u32) -> Result<f64> {
        self.values
            .get(&age)
            .copied()
            .ok_or(Error::MissingCurvePoint(age))
    }

    pub fn values(&self) -> &BTreeMap<u32, f64> {
        &self.values
    }

    /// Reads the `age,z` CSV format.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        for (i, row) in rdr.deserialize::<CurveRow>().enumerate() {
            let row = row.map_err(|e| Error::Row {
                row: i + 2,
                message: e.to_string(),
            })?;
            if values.insert(row.age, row.z).is_some() {
                return Err(Error::Row {
                    row: i + 2,
                    message: format!("duplicate age {}", row.age),
                });
            }
        }
        Self::new(values)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (&age, &z) in &self.values {
            w.serialize(CurveRow { age, z })?;
        }
        w.flush()?;
        Ok(())
    }
}
