#pragma once

#include "rainbow/analysis.hpp"
#include "rainbow/channel.hpp"
#include "rainbow/config.hpp"
#include "rainbow/detect.hpp"
#include "rainbow/error.hpp"
#include "rainbow/experiment.hpp"
#include "rainbow/flow.hpp"
#include "rainbow/linking.hpp"
#include "rainbow/traffic.hpp"
#include "rainbow/watermark.hpp"
