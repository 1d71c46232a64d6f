export {
  BridgeError,
  ClosedHandleError,
  EnvHandle,
  EXPECTED_ABI,
  type LaunchOptions,
  type PedVariant,
  type ResetOptions,
  type ResetResult,
  type StepInfo,
  type StepResult,
} from "./env.js";
