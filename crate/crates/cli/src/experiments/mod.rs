pub mod double_well;
pub mod inverse;
pub mod pinn;
pub mod swap_check;
