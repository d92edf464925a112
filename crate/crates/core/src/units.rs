//! Scalar quantity aliases. All values are SI except temperatures, which
//! are in degrees Celsius.

/// Temperature in °C.
pub type Celsius = f64;
/// Heat flow in W.
pub type Watts = f64;
/// Mass flow in kg/s.
pub type MassFlow = f64;
/// Pressure difference in Pa.
pub type Pascal = f64;
/// Time in s.
pub type Seconds = f64;
/// Specific heat in J/(kg·K).
pub type SpecificHeat = f64;
/// Volumetric heat capacity in J/(m³·K).
pub type VolumetricHeatCapacity = f64;
/// Dynamic viscosity in Pa·s.
pub type DynamicViscosity = f64;
/// Thermal conductance in W/K.
pub type Conductance = f64;
