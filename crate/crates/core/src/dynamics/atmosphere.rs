//! ISA standard atmosphere (troposphere + lower stratosphere).

pub const SEA_LEVEL_DENSITY: f64 = 1.225;
pub const SEA_LEVEL_TEMPERATURE: f64 = 288.15;
pub const SEA_LEVEL_PRESSURE: f64 = 101_325.0;

const LAPSE_RATE: f64 = -0.0065; // K/m
const GAS_CONSTANT: f64 = 287.052_87; // J/(kg K)
const HEAT_RATIO: f64 = 1.4;
const TROPOPAUSE: f64 = 11_000.0;
const G0: f64 = 9.806_65;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atmosphere {
    pub temperature: f64,
    pub pressure: f64,
    pub density: f64,
    pub speed_of_sound: f64,
}

impl Atmosphere {
    /// Properties at geometric altitude `h` (m). Negative altitudes extrapolate
    /// the tropospheric profile so crash transients stay finite.
    pub fn at(h: f64) -> Self {
        let (temperature, pressure) = if h <= TROPOPAUSE {
            let t = SEA_LEVEL_TEMPERATURE + LAPSE_RATE * h;
            let p = SEA_LEVEL_PRESSURE * (t / SEA_LEVEL_TEMPERATURE).powf(-G0 / (LAPSE_RATE * GAS_CONSTANT));
            (t, p)
        } else {
            let t11 = SEA_LEVEL_TEMPERATURE + LAPSE_RATE * TROPOPAUSE;
            let p11 = SEA_LEVEL_PRESSURE * (t11 / SEA_LEVEL_TEMPERATURE).powf(-G0 / (LAPSE_RATE * GAS_CONSTANT));
            (t11, p11 * (-G0 * (h - TROPOPAUSE) / (GAS_CONSTANT * t11)).exp())
        };
        let density = pressure / (GAS_CONSTANT * temperature);
        Self {
            temperature,
            pressure,
            density,
            speed_of_sound: (HEAT_RATIO * GAS_CONSTANT * temperature).sqrt(),
        }
    }
}

pub fn density(h: f64) -> f64 {
    Atmosphere::at(h).density
}

pub fn speed_of_sound(h: f64) -> f64 {
    Atmosphere::at(h).speed_of_sound
}

/// Indicated (equivalent) airspeed from true airspeed; compressibility ignored.
pub fn tas_to_ias(tas: f64, h: f64) -> f64 {
    tas * (density(h) / SEA_LEVEL_DENSITY).sqrt()
}

pub fn ias_to_tas(ias: f64, h: f64) -> f64 {
    ias / (density(h) / SEA_LEVEL_DENSITY).sqrt()
}
