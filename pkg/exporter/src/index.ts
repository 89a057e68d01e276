export { Tensor, rng, randn } from "./tensor";
export * from "./layers";
export {
  CLASS_NAMES,
  DEFAULT_SPEC,
  DualHeadNet,
  DualHeadSpec,
  ForwardResult,
  Param,
  tinyNet,
} from "./model";
export { compositeLoss, compositeLossBackward, crossEntropy, diceLoss, LossValues } from "./loss";
export { earlyStopCheck, EarlyStopDecision, EarlyStopState } from "./earlystop";
export { classGradAtActs, gradCam, gradCamPP, normalize01, saliency, SaliencyMethod, scoreCam } from "./saliency";
export { writeNpyFloat32, npyBytesFloat32 } from "./npy";
export { writePngGray8, pngBytesGray8 } from "./png";
export { exportSample, ExportedFiles, METHODS } from "./export";
export { Adam, DEFAULT_ADAM, Sample, trainStep } from "./train";
export { syntheticSample } from "./synthetic";
