use super::{DeviceKind, DeviceProfile, ScheduleParams, UserProfile};
use crate::error::{Error, Result};

pub const PRESETS: [&str; 4] = ["user8", "user17", "user20", "user26"];

fn desktop() -> DeviceProfile {
    DeviceProfile {
        kind: DeviceKind::Desktop,
        active_power: 85.0,
        idle_power: 75.0,
        ripple_sd_active: 8.0,
        ripple_sd_idle: 1.0,
        p_left_on_when_absent: 0.5,
        p_used_per_day: 0.75,
    }
}

fn monitor() -> DeviceProfile {
    DeviceProfile {
        kind: DeviceKind::Monitor,
        active_power: 28.0,
        idle_power: 22.0,
        ripple_sd_active: 1.5,
        ripple_sd_idle: 0.2,
        p_left_on_when_absent: 0.5,
        p_used_per_day: 0.95,
    }
}

fn laptop(p_used_per_day: f64) -> DeviceProfile {
    DeviceProfile {
        kind: DeviceKind::Laptop,
        active_power: 40.0,
        idle_power: 30.0,
        ripple_sd_active: 6.0,
        ripple_sd_idle: 0.8,
        p_left_on_when_absent: 0.5,
        p_used_per_day,
    }
}

fn lamp() -> DeviceProfile {
    DeviceProfile {
        kind: DeviceKind::Lamp,
        active_power: 15.0,
        idle_power: 15.0,
        ripple_sd_active: 0.3,
        ripple_sd_idle: 0.3,
        p_left_on_when_absent: 0.3,
        p_used_per_day: 0.5,
    }
}

fn charger() -> DeviceProfile {
    DeviceProfile {
        kind: DeviceKind::Charger,
        active_power: 6.0,
        idle_power: 6.0,
        ripple_sd_active: 0.2,
        ripple_sd_idle: 0.2,
        p_left_on_when_absent: 0.7,
        p_used_per_day: 0.5,
    }
}

fn schedule(arrival: f64, departure: f64) -> ScheduleParams {
    ScheduleParams {
        arrival_mean_h: arrival,
        arrival_sd_h: 0.6,
        departure_mean_h: departure,
        departure_sd_h: 0.8,
        absence_rate_per_h: 0.25,
        absence_mean_min: 25.0,
    }
}

fn user(name: &str, devices: Vec<DeviceProfile>, schedule: ScheduleParams) -> UserProfile {
    UserProfile {
        name: name.into(),
        devices,
        schedule,
        days: 30,
        switch_delay_max_s: 45,
    }
}

/// Device sets follow the surveyed users: user 8 has no desktop and uses a
/// laptop often, user 17 rarely uses a laptop, user 20 has two monitors.
pub fn preset(name: &str) -> Result<UserProfile> {
    let profile = match name {
        "user8" => user("user8", vec![monitor(), laptop(0.8), lamp(), charger()], schedule(9.5, 18.5)),
        "user17" => user(
            "user17",
            vec![desktop(), monitor(), laptop(0.2), lamp(), charger(), charger()],
            schedule(9.0, 18.0),
        ),
        "user20" => user(
            "user20",
            vec![desktop(), monitor(), monitor(), laptop(0.8), lamp(), charger(), charger(), charger()],
            schedule(8.5, 17.5),
        ),
        "user26" => user(
            "user26",
            vec![desktop(), monitor(), laptop(0.8), lamp(), charger(), charger()],
            schedule(10.0, 19.5),
        ),
        _ => {
            return Err(Error::InvalidConfig(format!(
                "unknown preset {name:?}; expected one of {PRESETS:?}"
            )))
        }
    };
    Ok(profile)
}
