//! Model inputs: sensor setups, cost catalogs, city scenarios and the
//! built-in city fixtures.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Series id used by items that only follow general inflation.
pub const NO_ESCALATION: &str = "none";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Urban,
    Rural,
    Highway,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Urban, Domain::Rural, Domain::Highway];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Urban => "urban",
            Domain::Rural => "rural",
            Domain::Highway => "highway",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Perception sensor kinds, in canonical code order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sensor {
    Thermal,
    Camera,
    Radar,
    Lidar,
}

impl Sensor {
    pub const ALL: [Sensor; 4] = [Sensor::Thermal, Sensor::Camera, Sensor::Radar, Sensor::Lidar];

    pub fn code(self) -> char {
        match self {
            Sensor::Thermal => 'T',
            Sensor::Camera => 'C',
            Sensor::Radar => 'R',
            Sensor::Lidar => 'L',
        }
    }

    pub fn from_code(c: char) -> Option<Sensor> {
        match c.to_ascii_uppercase() {
            'T' => Some(Sensor::Thermal),
            'C' => Some(Sensor::Camera),
            'R' => Some(Sensor::Radar),
            'L' => Some(Sensor::Lidar),
            _ => None,
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// A sensor combination such as `CL`. Only the ten combinations studied are
/// representable; codes are canonicalized to T/C/R/L order on parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetupCode(u8);

impl SetupCode {
    pub const ALL: [&'static str; 10] = ["C", "R", "T", "L", "CR", "TR", "CL", "TL", "CRL", "TRL"];

    pub fn all() -> Vec<SetupCode> {
        Self::ALL.iter().map(|s| s.parse().unwrap()).collect()
    }

    pub fn contains(self, sensor: Sensor) -> bool {
        self.0 & sensor.bit() != 0
    }

    pub fn sensors(self) -> impl Iterator<Item = Sensor> {
        Sensor::ALL.into_iter().filter(move |s| self.contains(*s))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: SetupCode) -> bool {
        self.0 & !other.0 == 0
    }
}

impl FromStr for SetupCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut mask = 0u8;
        for c in s.trim().chars() {
            let sensor = Sensor::from_code(c).ok_or_else(|| Error::UnknownSetup(s.to_string()))?;
            if mask & sensor.bit() != 0 {
                return Err(Error::UnknownSetup(s.to_string()));
            }
            mask |= sensor.bit();
        }
        let code = SetupCode(mask);
        if mask == 0 || !Self::ALL.contains(&code.to_string().as_str()) {
            return Err(Error::UnknownSetup(s.to_string()));
        }
        Ok(code)
    }
}

impl fmt::Display for SetupCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.sensors() {
            write!(f, "{}", s.code())?;
        }
        Ok(())
    }
}

impl Serialize for SetupCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SetupCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-node electrical load model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerProfile {
    pub base_w: f64,
    pub camera_w: f64,
    pub radar_w: f64,
    pub thermal_w: f64,
    pub lidar_w: f64,
    /// Exceeding this is reported as a warning, not rejected.
    pub cap_w: f64,
}

impl Default for PowerProfile {
    fn default() -> Self {
        PowerProfile {
            base_w: 300.0,
            camera_w: 20.0,
            radar_w: 20.0,
            thermal_w: 20.0,
            lidar_w: 30.0,
            cap_w: 400.0,
        }
    }
}

impl PowerProfile {
    pub fn draw_w(&self, code: SetupCode) -> f64 {
        self.base_w
            + code
                .sensors()
                .map(|s| match s {
                    Sensor::Camera => self.camera_w,
                    Sensor::Radar => self.radar_w,
                    Sensor::Thermal => self.thermal_w,
                    Sensor::Lidar => self.lidar_w,
                })
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSetup {
    pub code: SetupCode,
    pub power_draw_w: f64,
    /// Set when the peak draw exceeds the catalog's per-node cap.
    pub warning: Option<String>,
}

impl SensorSetup {
    pub fn new(code: SetupCode, power_draw_w: f64, cap_w: f64) -> Result<Self> {
        if !(power_draw_w > 0.0 && power_draw_w.is_finite()) {
            return Err(Error::validation("power_draw_w", format!("must be > 0, got {power_draw_w}")));
        }
        let warning = (power_draw_w > cap_w)
            .then(|| format!("setup {code} draws {power_draw_w} W, above the {cap_w} W per-node cap"));
        Ok(SensorSetup {
            code,
            power_draw_w,
            warning,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    CapexHardware,
    CapexInstall,
    OpexEnergy,
    OpexPersonnel,
    OpexBackend,
    OpexMaintenance,
}

impl Category {
    pub fn is_capex(self) -> bool {
        matches!(self, Category::CapexHardware | Category::CapexInstall)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::CapexHardware => "capex_hardware",
            Category::CapexInstall => "capex_install",
            Category::OpexEnergy => "opex_energy",
            Category::OpexPersonnel => "opex_personnel",
            Category::OpexBackend => "opex_backend",
            Category::OpexMaintenance => "opex_maintenance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceLife {
    Months(u32),
    NotRenewable,
}

impl ServiceLife {
    pub fn months(self) -> Option<u32> {
        match self {
            ServiceLife::Months(m) => Some(m),
            ServiceLife::NotRenewable => None,
        }
    }
}

impl Serialize for ServiceLife {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ServiceLife::Months(m) => serializer.serialize_u32(*m),
            ServiceLife::NotRenewable => serializer.serialize_str("not_renewable"),
        }
    }
}

impl<'de> Deserialize<'de> for ServiceLife {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Months(u32),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Months(m) => Ok(ServiceLife::Months(m)),
            Raw::Text(t) if matches!(t.as_str(), "not_renewable" | "not renewable" | "none") => {
                Ok(ServiceLife::NotRenewable)
            }
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "service_life_months must be an integer or \"not_renewable\", got {t:?}"
            ))),
        }
    }
}

/// Which sensor setups an item belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AppliesTo {
    All,
    Sensors(BTreeSet<Sensor>),
}

impl AppliesTo {
    pub fn matches(&self, code: SetupCode) -> bool {
        match self {
            AppliesTo::All => true,
            AppliesTo::Sensors(set) => set.iter().any(|s| code.contains(*s)),
        }
    }
}

impl Serialize for AppliesTo {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AppliesTo::All => serializer.serialize_str("all"),
            AppliesTo::Sensors(set) => {
                serializer.collect_seq(set.iter().map(|s| s.code().to_string()))
            }
        }
    }
}

impl<'de> Deserialize<'de> for AppliesTo {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            List(Vec<String>),
        }
        let codes = match Raw::deserialize(deserializer)? {
            Raw::Text(t) if t.eq_ignore_ascii_case("all") => return Ok(AppliesTo::All),
            Raw::Text(t) => vec![t],
            Raw::List(l) => l,
        };
        let mut set = BTreeSet::new();
        for code in &codes {
            let mut chars = code.chars();
            let sensor = match (chars.next(), chars.next()) {
                (Some(c), None) => Sensor::from_code(c),
                _ => None,
            };
            set.insert(sensor.ok_or_else(|| {
                serde::de::Error::custom(format!("unknown sensor code {code:?}"))
            })?);
        }
        if set.is_empty() {
            return Err(serde::de::Error::custom("applies_to must not be empty"));
        }
        Ok(AppliesTo::Sensors(set))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostItem {
    pub id: String,
    #[serde(default)]
    pub label: String,
    pub category: Category,
    pub unit_price_eur: f64,
    pub escalation_series: String,
    pub service_life_months: ServiceLife,
    pub domains: BTreeSet<Domain>,
    pub applies_to: AppliesTo,
    pub quantity_per_node: f64,
}

impl CostItem {
    pub fn escalates(&self) -> bool {
        self.escalation_series != NO_ESCALATION
    }

    pub fn applies(&self, code: SetupCode, domain: Domain) -> bool {
        self.domains.contains(&domain) && self.applies_to.matches(code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangular {
    pub min: f64,
    pub mode: f64,
    pub max: f64,
}

impl Triangular {
    pub fn new(min: f64, mode: f64, max: f64) -> Result<Self> {
        let t = Triangular { min, mode, max };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.min.is_finite() && self.mode.is_finite() && self.max.is_finite();
        if !finite || !(self.min <= self.mode && self.mode <= self.max) {
            return Err(Error::validation(
                "triangular",
                format!("need min <= mode <= max, got ({}, {}, {})", self.min, self.mode, self.max),
            ));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        (self.min + self.mode + self.max) / 3.0
    }
}

/// Replacement of a lidar hardware line by solid-state lidar from a given month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SslSubstitution {
    pub item_id: String,
    /// Defaults to the midpoint of the scenario horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substitution_month: Option<u32>,
    pub triangular: Triangular,
}

impl SslSubstitution {
    pub fn month_for(&self, horizon_months: u32) -> u32 {
        self.substitution_month.unwrap_or(horizon_months / 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostCatalog {
    #[serde(default)]
    pub power: PowerProfile,
    pub items: Vec<CostItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssl_substitution: Option<SslSubstitution>,
}

impl CostCatalog {
    pub fn from_json(text: &str) -> Result<Self> {
        let catalog: CostCatalog =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("catalog: {e}")))?;
        catalog.validate()?;
        Ok(catalog)
    }

    /// The sample catalog shipped with the crate. Prices are illustrative.
    pub fn sample() -> Self {
        Self::from_json(include_str!("../data/sample_catalog.json")).expect("bundled catalog is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for item in &self.items {
            let field = |name: &str| format!("items[{}].{name}", item.id);
            if item.id.is_empty() {
                return Err(Error::validation("items[].id", "must not be empty"));
            }
            if !seen.insert(item.id.as_str()) {
                return Err(Error::validation(field("id"), "duplicate item id"));
            }
            if !(item.unit_price_eur >= 0.0 && item.unit_price_eur.is_finite()) {
                return Err(Error::validation(field("unit_price_eur"), "must be a finite value >= 0"));
            }
            if !(item.quantity_per_node >= 0.0 && item.quantity_per_node.is_finite()) {
                return Err(Error::validation(field("quantity_per_node"), "must be a finite value >= 0"));
            }
            if item.service_life_months == ServiceLife::Months(0) {
                return Err(Error::validation(field("service_life_months"), "must be > 0"));
            }
            if item.domains.is_empty() {
                return Err(Error::validation(field("domains"), "must name at least one domain"));
            }
            if item.category == Category::OpexMaintenance && item.escalates() {
                return Err(Error::validation(
                    field("escalation_series"),
                    "maintenance items follow inflation only and must use \"none\"",
                ));
            }
        }
        let power = &self.power;
        for (name, w) in [
            ("base_w", power.base_w),
            ("camera_w", power.camera_w),
            ("radar_w", power.radar_w),
            ("thermal_w", power.thermal_w),
            ("lidar_w", power.lidar_w),
            ("cap_w", power.cap_w),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::validation(format!("power.{name}"), "must be a finite value >= 0"));
            }
        }
        if let Some(ssl) = &self.ssl_substitution {
            let target = self.item(&ssl.item_id).ok_or_else(|| {
                Error::validation("ssl_substitution.item_id", format!("no item `{}`", ssl.item_id))
            })?;
            let is_lidar = match &target.applies_to {
                AppliesTo::Sensors(s) => s.contains(&Sensor::Lidar),
                AppliesTo::All => false,
            };
            if target.category != Category::CapexHardware || !is_lidar {
                return Err(Error::validation(
                    "ssl_substitution.item_id",
                    format!("`{}` is not a lidar hardware item", ssl.item_id),
                ));
            }
            ssl.triangular.validate()?;
            if ssl.triangular.min < 0.0 {
                return Err(Error::validation("ssl_substitution.triangular.min", "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Checks every escalation series reference against the known series ids.
    pub fn check_series<S: AsRef<str>>(&self, known: &[S]) -> Result<()> {
        for item in self.items.iter().filter(|i| i.escalates()) {
            if !known.iter().any(|k| k.as_ref() == item.escalation_series) {
                return Err(Error::UnknownSeries {
                    item: item.id.clone(),
                    series: item.escalation_series.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn item(&self, id: &str) -> Option<&CostItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn setup(&self, code: SetupCode) -> Result<SensorSetup> {
        SensorSetup::new(code, self.power.draw_w(code), self.power.cap_w)
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<CostCatalog> {
    CostCatalog::from_json(&read(path.as_ref())?)
}

/// Loads a catalog and checks its series references against `known_series`.
pub fn load_catalog_checked<S: AsRef<str>>(path: impl AsRef<Path>, known_series: &[S]) -> Result<CostCatalog> {
    let catalog = load_catalog(path)?;
    catalog.check_series(known_series)?;
    Ok(catalog)
}

pub(crate) fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Items relevant to one node of `setup` in `domain`, with per-node quantities.
pub fn bill_of_materials<'a>(
    catalog: &'a CostCatalog,
    setup: &SensorSetup,
    domain: Domain,
) -> Vec<(&'a CostItem, f64)> {
    catalog
        .items
        .iter()
        .filter(|item| item.applies(setup.code, domain))
        .map(|item| (item, item.quantity_per_node))
        .collect()
}

fn default_horizon() -> u32 {
    180
}
fn default_build() -> u32 {
    36
}
fn default_rate() -> f64 {
    0.0175
}
fn default_per_employee() -> u32 {
    250
}
fn default_personnel_max() -> u32 {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityScenario {
    pub name: String,
    pub nodes_urban: u64,
    pub nodes_rural: u64,
    pub nodes_highway: u64,
    #[serde(default = "default_horizon")]
    pub horizon_months: u32,
    #[serde(default = "default_build")]
    pub build_months: u32,
    #[serde(default = "default_rate")]
    pub real_discount_rate_annual: f64,
    #[serde(default = "default_per_employee")]
    pub personnel_nodes_per_employee: u32,
    #[serde(default = "default_personnel_max")]
    pub personnel_max: u32,
}

impl CityScenario {
    pub fn new(name: impl Into<String>, urban: u64, rural: u64, highway: u64) -> Self {
        CityScenario {
            name: name.into(),
            nodes_urban: urban,
            nodes_rural: rural,
            nodes_highway: highway,
            horizon_months: default_horizon(),
            build_months: default_build(),
            real_discount_rate_annual: default_rate(),
            personnel_nodes_per_employee: default_per_employee(),
            personnel_max: default_personnel_max(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: CityScenario =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn nodes(&self, domain: Domain) -> u64 {
        match domain {
            Domain::Urban => self.nodes_urban,
            Domain::Rural => self.nodes_rural,
            Domain::Highway => self.nodes_highway,
        }
    }

    pub fn total_nodes(&self) -> u64 {
        self.nodes_urban + self.nodes_rural + self.nodes_highway
    }

    pub fn validate(&self) -> Result<()> {
        if self.build_months < 1 {
            return Err(Error::validation("build_months", "must be >= 1"));
        }
        // Deployments land in months 1..=build_months, so the horizon must
        // contain month build_months.
        if self.horizon_months <= self.build_months {
            return Err(Error::validation(
                "horizon_months",
                format!("must exceed build_months ({})", self.build_months),
            ));
        }
        if self.total_nodes() == 0 {
            return Err(Error::validation("nodes", "total node count must be > 0"));
        }
        let r = self.real_discount_rate_annual;
        if !(r > -1.0 && r < 1.0) {
            return Err(Error::validation("real_discount_rate_annual", format!("must lie in (-1, 1), got {r}")));
        }
        if self.personnel_nodes_per_employee == 0 {
            return Err(Error::validation("personnel_nodes_per_employee", "must be >= 1"));
        }
        Ok(())
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.real_discount_rate_annual = rate;
        self
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<CityScenario> {
    CityScenario::from_json(&read(path.as_ref())?)
}

#[derive(Deserialize)]
struct CityFixture {
    name: String,
    nodes_urban: u64,
    nodes_rural: u64,
    nodes_highway: u64,
}

/// The eight German reference cities with intersection node counts per road domain.
pub fn builtin_cities() -> Vec<CityScenario> {
    let fixtures: Vec<CityFixture> =
        serde_json::from_str(include_str!("../data/cities.json")).expect("bundled cities are valid");
    fixtures
        .into_iter()
        .map(|c| CityScenario::new(c.name, c.nodes_urban, c.nodes_rural, c.nodes_highway))
        .collect()
}

pub fn builtin_city(name: &str) -> Result<CityScenario> {
    let cities = builtin_cities();
    cities
        .iter()
        .find(|c| c.name.eq_ignore_ascii_case(name))
        .cloned()
        .ok_or_else(|| Error::UnknownCity {
            name: name.to_string(),
            known: cities.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(", "),
        })
}
